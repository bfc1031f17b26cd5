"""Keyword-to-sentence generation as text infilling, plus two baselines.

Training pairs are built by masking segments of a sentence: the input keeps
the surviving tokens with one [blank] per removed segment, the output lists
the removed segments each terminated by [ans].  The LM trains on
``input [SEP] output [CLS]`` and, at inference, continues the input frame
until it has produced as many [ans] as there are [blank]s; the blanks are
then filled with the generated segments in order.

Baselines: an Okapi BM25 index over the training sentences, and a masked
model predicting exactly one token per blank.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decode import DecoderConfig, DecodeTrace, decode
from .errors import (
    IncompleteGenerationError,
    InvalidArgumentError,
    MalformedOutputError,
)
from .lm import LmModel, MaskedLm
from .rng import derive_seed, make_rng
from .vocab import ANS, BLANK, CLS, MASK, NULL, PAD, SEP, Vocab

_STRUCTURAL = {SEP, CLS, BLANK, MASK, NULL, PAD}


@dataclass
class InfillExample:
    """One training pair plus the metadata to reassemble the source."""

    source: list[str]
    input: list[str]
    output: list[str]
    spans: list[tuple[int, int]]

    def train_tokens(self) -> list[str]:
        return self.input + [SEP] + self.output + [CLS]


def _validate_spans(n: int, spans: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    spans = sorted((int(a), int(b)) for a, b in spans)
    covered = 0
    prev_end = -1
    for start, length in spans:
        if length < 1 or start < 0 or start + length > n:
            raise InvalidArgumentError(f"span {(start, length)} out of range")
        if start < prev_end:
            raise InvalidArgumentError("spans must not overlap")
        prev_end = start + length
        covered += length
    if spans and covered >= n:
        raise InvalidArgumentError("masked portion must be smaller than the sentence")
    return spans


def make_example(
    sentence: Sequence[str],
    spans: Sequence[tuple[int, int]] | None = None,
    rng: np.random.Generator | None = None,
    rate: float = 0.3,
) -> InfillExample:
    """Build an infilling pair by masking the given or randomly drawn spans.

    Pass explicit (start, length) ``spans`` to mask them, or an ``rng`` to
    draw random segments covering roughly ``rate`` of the sentence.
    """
    tokens = list(sentence)
    if not tokens:
        raise InvalidArgumentError("sentence must be nonempty")
    if spans is None:
        if rng is None:
            raise InvalidArgumentError("provide spans or an rng")
        spans = _random_spans(len(tokens), rng, rate)
    spans = _validate_spans(len(tokens), spans)
    inp: list[str] = []
    out: list[str] = []
    cursor = 0
    for start, length in spans:
        inp.extend(tokens[cursor:start])
        inp.append(BLANK)
        out.extend(tokens[start : start + length])
        out.append(ANS)
        cursor = start + length
    inp.extend(tokens[cursor:])
    return InfillExample(source=tokens, input=inp, output=out, spans=spans)


def _random_spans(
    n: int, rng: np.random.Generator, rate: float
) -> list[tuple[int, int]]:
    if not (0 < rate < 1):
        raise InvalidArgumentError("rate must lie in (0, 1)")
    budget = max(1, int(round(rate * n)))
    if budget >= n:
        budget = n - 1
    spans: list[tuple[int, int]] = []
    taken = np.zeros(n, dtype=bool)
    while budget > 0:
        length = int(rng.integers(1, min(3, budget) + 1))
        free = [
            s
            for s in range(n - length + 1)
            if not taken[s : s + length].any()
        ]
        if not free:
            break
        start = int(free[rng.integers(0, len(free))])
        taken[start : start + length] = True
        spans.append((start, length))
        budget -= length
    if taken.all():
        start, length = spans.pop()
        taken[start : start + length] = False
    return sorted(spans)


def mask_spans_keeping(
    tokens: Sequence[str], keywords: Sequence[str]
) -> list[tuple[int, int]]:
    """Spans that mask everything except the keywords, matched in order."""
    tokens = list(tokens)
    positions: list[int] = []
    j = 0
    for kw in keywords:
        while j < len(tokens) and tokens[j] != kw:
            j += 1
        if j == len(tokens):
            raise InvalidArgumentError(f"keyword {kw!r} not found in order")
        positions.append(j)
        j += 1
    spans: list[tuple[int, int]] = []
    cursor = 0
    for p in positions:
        if p > cursor:
            spans.append((cursor, p - cursor))
        cursor = p + 1
    if cursor < len(tokens):
        spans.append((cursor, len(tokens) - cursor))
    return spans


def reassemble(input_tokens: Sequence[str], output_tokens: Sequence[str]) -> list[str]:
    """Fill each [blank] with the matching [ans]-terminated output segment."""
    inp = list(input_tokens)
    out = list(output_tokens)
    n_blanks = inp.count(BLANK)
    n_ans = out.count(ANS)
    if n_blanks != n_ans:
        raise MalformedOutputError(
            f"{n_blanks} blanks but {n_ans} answer markers"
        )
    segments: list[list[str]] = []
    current: list[str] = []
    for tok in out:
        if tok == ANS:
            segments.append(current)
            current = []
        else:
            current.append(tok)
    result: list[str] = []
    seg_iter = iter(segments)
    for tok in inp:
        if tok == BLANK:
            result.extend(next(seg_iter))
        else:
            result.append(tok)
    return result


def keyword_frame(keywords: Sequence[Sequence[str]]) -> list[str]:
    """Inference input: [blank] k1 [blank] k2 ... [blank]."""
    frame: list[str] = [BLANK]
    for kw in keywords:
        frame.extend(kw)
        frame.append(BLANK)
    return frame


def contains_in_order(tokens: Sequence[str], keywords: Sequence[Sequence[str]]) -> bool:
    """True when every keyword occurs, in order, left to right."""
    j = 0
    flat: list[str] = [t for kw in keywords for t in kw]
    for tok in tokens:
        if j < len(flat) and tok == flat[j]:
            j += 1
    return j == len(flat)


def fill_blanks(
    model: LmModel,
    frame: Sequence[str],
    cfg: DecoderConfig,
    budget: int | None = None,
    n_candidates: int = 3,
) -> tuple[list[list[str]], dict]:
    """Complete an arbitrary blank-bearing frame into full sentences.

    Runs ``n_candidates`` decodes under derived seeds; a decode counts only
    if it balances its answer markers against the frame's blanks before the
    budget (or the end marker) cuts it off.  Raises when every candidate ran
    out of budget; the error carries the first partial decode.
    """
    frame = list(frame)
    if cfg.strategy == "beam":
        raise InvalidArgumentError("blank filling needs a stepwise strategy")
    vocab = model.vocab
    prefix = vocab.encode(frame + [SEP])
    budget = budget or cfg.max_new_tokens
    n_blanks = frame.count(BLANK)
    ans_id = vocab.ans_id

    def balanced(ids: list[int]) -> bool:
        return sum(1 for t in ids if t == ans_id) >= n_blanks

    completed: list[list[str]] = []
    report = {"requested": n_candidates, "incomplete": 0, "malformed": 0}
    first_failure: tuple[list[int], DecodeTrace] | None = None
    for i in range(n_candidates):
        sub_cfg = DecoderConfig(
            strategy=cfg.strategy,
            k=cfg.k,
            alpha=cfg.alpha,
            beam_width=cfg.beam_width,
            nucleus_p=cfg.nucleus_p,
            max_new_tokens=budget,
            seed=derive_seed(cfg.seed, f"candidate:{i}"),
        )
        new_ids, trace = decode(model, prefix, sub_cfg, stop=balanced)
        out_tokens = [vocab.tokens[t] for t in new_ids]
        if out_tokens and out_tokens[-1] == CLS:
            out_tokens = out_tokens[:-1]
        if out_tokens.count(ANS) != n_blanks:
            report["incomplete"] += 1
            if first_failure is None:
                first_failure = (new_ids, trace)
            continue
        if any(t in _STRUCTURAL for t in out_tokens):
            report["malformed"] += 1
            continue
        completed.append(reassemble(frame, out_tokens))
    if not completed and first_failure is not None:
        raise IncompleteGenerationError(
            "generation budget exhausted before balancing answer markers",
            partial=first_failure[0],
            trace=first_failure[1],
        )
    report["completed"] = len(completed)
    return completed, report


def infill_generate(
    model: LmModel,
    keywords: Sequence[Sequence[str]],
    cfg: DecoderConfig,
    budget: int | None = None,
    n_candidates: int = 3,
) -> tuple[list[list[str]], dict]:
    """Sentences containing the keywords in order, via blank filling.

    Candidates that drop or reorder a keyword are filtered out, not
    repaired; the report counts them.
    """
    if not keywords:
        raise InvalidArgumentError("keywords must be nonempty")
    frame = keyword_frame(keywords)
    completed, report = fill_blanks(model, frame, cfg, budget, n_candidates)
    accepted: list[list[str]] = []
    seen: set[tuple[str, ...]] = set()
    report["missing_keywords"] = 0
    for sentence in completed:
        if not contains_in_order(sentence, keywords):
            report["missing_keywords"] += 1
            continue
        key = tuple(sentence)
        if key not in seen:
            seen.add(key)
            accepted.append(sentence)
    report["accepted"] = len(accepted)
    return accepted, report


# -- BM25 baseline -------------------------------------------------------------


@dataclass
class Bm25Index:
    """Okapi BM25 inverted index over tokenized documents."""

    docs: list[list[str]]
    k1: float = 1.2
    b: float = 0.75
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    doc_lens: list[int] = field(default_factory=list)
    avgdl: float = 0.0

    @classmethod
    def build(cls, docs: list[list[str]], k1: float = 1.2, b: float = 0.75):
        index = cls(docs=[list(d) for d in docs], k1=k1, b=b)
        for i, doc in enumerate(index.docs):
            index.doc_lens.append(len(doc))
            for term, tf in sorted(Counter(doc).items()):
                index.postings.setdefault(term, []).append((i, tf))
        index.avgdl = (
            sum(index.doc_lens) / len(index.doc_lens) if index.doc_lens else 0.0
        )
        return index

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        n = len(self.docs)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def bm25_search(
    index: Bm25Index, query: Sequence[str], topn: int
) -> list[tuple[int, float]]:
    """Top documents by Okapi BM25; ties break toward the lower doc id."""
    query = list(query)
    if not query:
        raise InvalidArgumentError("empty query")
    if topn < 1:
        raise InvalidArgumentError("topn must be >= 1")
    scores = np.zeros(len(index.docs))
    for term in sorted(set(query)):
        posting = index.postings.get(term)
        if not posting:
            continue
        idf = index.idf(term)
        for doc_id, tf in posting:
            dl = index.doc_lens[doc_id]
            denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
            scores[doc_id] += idf * tf * (index.k1 + 1.0) / denom
    order = sorted(range(len(index.docs)), key=lambda i: (-scores[i], i))
    return [(i, float(scores[i])) for i in order[:topn]]


# -- single-token masked baseline ---------------------------------------------


def mlm_fill(model: MaskedLm, input_tokens: Sequence[str]) -> list[str]:
    """Replace each [blank] with the argmax single-token prediction."""
    tokens = list(input_tokens)
    if BLANK not in tokens:
        raise InvalidArgumentError("input has no blanks")
    vocab = model.vocab
    probe = [vocab.mask_id if t == BLANK else vocab.index[t] for t in tokens]
    out = list(tokens)
    for i, tok in enumerate(tokens):
        if tok == BLANK:
            dist = model.predict_dist(probe, i)
            out[i] = vocab.tokens[int(np.argmax(dist))]
    return out


def build_mask_instances(
    corpus: list[list[str]], vocab: Vocab, seed: int, per_sentence: int = 1
) -> list[tuple[list[int], int, int]]:
    """Plain word-masking instances for the single-token fill baseline."""
    rng = make_rng(derive_seed(seed, "mlm-baseline"))
    instances = []
    for sent in corpus:
        ids = vocab.encode(sent)
        for _ in range(per_sentence):
            i = int(rng.integers(0, len(ids)))
            instances.append((ids[:i] + [vocab.mask_id] + ids[i + 1 :], i, ids[i]))
    return instances
