"""Phrase polishing and sentence expansion.

Polishing ranks the graph neighbors of a selected phrase by a blend of
offline similarity (cosine k-NN edges) and online context fit (mean cosine
between the candidate's vector and the vectors of surrounding words).

Expansion comes in two forms: skeleton training pairs built by dropping
modifier spans from annotated sentences (the seq2seq route trains on
``skeleton [SEP] sentence [CLS]``), and local expansion that plants [MASK]
sites around nouns and fills them with the infilling model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .decode import DecoderConfig
from .errors import (
    AnnotationError,
    DegenerateInputError,
    EmbeddingLookupError,
    IncompleteGenerationError,
    InvalidArgumentError,
)
from .infill import BLANK, fill_blanks
from .rng import split_rng
from .vocab import MASK


@dataclass
class PolishConfig:
    lam: float = 0.5  # weight on graph similarity vs context fit
    window: int = 4  # context words taken on each side
    top_m: int = 5

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise InvalidArgumentError("lam must lie in [0, 1]")
        if self.window < 1:
            raise InvalidArgumentError("window must be >= 1")
        if self.top_m < 1:
            raise InvalidArgumentError("top_m must be >= 1")


@dataclass
class ScoredCandidate:
    phrase: str
    s1: float
    s2: float
    score: float

    def as_dict(self) -> dict:
        return {
            "phrase": self.phrase,
            "s1": self.s1,
            "s2": self.s2,
            "score": self.score,
        }


@dataclass
class SimilarityGraph:
    """Cosine k-NN over phrase embeddings, with the tables kept for scoring."""

    edges: dict[str, list[tuple[str, float]]]
    in_emb: dict[str, np.ndarray]
    out_emb: dict[str, np.ndarray]
    topn: int

    @property
    def nodes(self) -> list[str]:
        return list(self.edges)

    def neighbors(self, phrase: str) -> list[tuple[str, float]]:
        return self.edges.get(phrase, [])

    def save(self, path: str | Path) -> None:
        payload = {
            "format_version": 1,
            "topn": self.topn,
            "edges": {p: [[q, s] for q, s in nb] for p, nb in self.edges.items()},
            "in_emb": {p: v.tolist() for p, v in self.in_emb.items()},
            "out_emb": {p: v.tolist() for p, v in self.out_emb.items()},
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SimilarityGraph":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            edges={
                p: [(q, float(s)) for q, s in nb]
                for p, nb in payload["edges"].items()
            },
            in_emb={p: np.asarray(v, float) for p, v in payload["in_emb"].items()},
            out_emb={p: np.asarray(v, float) for p, v in payload["out_emb"].items()},
            topn=int(payload["topn"]),
        )


def _unit(v: np.ndarray, name: str) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0:
        raise DegenerateInputError(f"zero embedding vector for {name!r}")
    return v / norm


def build_graph(
    embeddings: dict[str, np.ndarray],
    topn: int = 10,
    out_embeddings: dict[str, np.ndarray] | None = None,
) -> SimilarityGraph:
    """k-NN similarity graph: per phrase, topn neighbors by cosine.

    Neighbor lists sort by similarity descending, ties lexicographic; no
    self edges.  ``out_embeddings`` defaults to the input table (a single
    table plays both roles).
    """
    if len(embeddings) < 2:
        raise InvalidArgumentError("need at least two phrases")
    phrases = list(embeddings)
    mat = np.stack([_unit(np.asarray(embeddings[p], float), p) for p in phrases])
    sims = np.clip(mat @ mat.T, -1.0, 1.0)
    edges: dict[str, list[tuple[str, float]]] = {}
    for i, p in enumerate(phrases):
        ranked = sorted(
            ((phrases[j], float(sims[i, j])) for j in range(len(phrases)) if j != i),
            key=lambda e: (-e[1], e[0]),
        )
        edges[p] = ranked[:topn]
    in_emb = {p: np.asarray(v, float) for p, v in embeddings.items()}
    out_emb = (
        {p: np.asarray(v, float) for p, v in out_embeddings.items()}
        if out_embeddings is not None
        else in_emb
    )
    return SimilarityGraph(edges=edges, in_emb=in_emb, out_emb=out_emb, topn=topn)


def s2_score(
    candidate: str,
    context: Sequence[str],
    in_emb: dict[str, np.ndarray],
    out_emb: dict[str, np.ndarray],
) -> float:
    """Mean cosine between each context word's vector and the candidate's."""
    context = list(context)
    if not context:
        raise InvalidArgumentError("context must be nonempty")
    if candidate not in out_emb:
        raise EmbeddingLookupError(candidate)
    w = _unit(np.asarray(out_emb[candidate], float), candidate)
    total = 0.0
    for x in context:
        if x not in in_emb:
            raise EmbeddingLookupError(x)
        v = _unit(np.asarray(in_emb[x], float), x)
        total += float(np.clip(v @ w, -1.0, 1.0))
    return total / len(context)


def polish(
    tokens: Sequence[str],
    span: tuple[int, int],
    graph: SimilarityGraph,
    cfg: PolishConfig | None = None,
) -> list[ScoredCandidate]:
    """Ranked replacement candidates for the span phrase.

    Candidates are the graph neighbors of the span phrase; each is scored
    lam * s1 + (1 - lam) * s2 where s2 averages cosine fit against up to
    ``window`` embedded words on each side of the span.  An unknown span
    phrase yields an empty list.
    """
    cfg = cfg or PolishConfig()
    tokens = list(tokens)
    start, length = span
    if not (0 <= start and length >= 1 and start + length <= len(tokens)):
        raise InvalidArgumentError(f"span {span} outside the sentence")
    phrase = " ".join(tokens[start : start + length])
    neighbors = graph.neighbors(phrase)
    if not neighbors:
        return []
    left = tokens[max(0, start - cfg.window) : start]
    right = tokens[start + length : start + length + cfg.window]
    context = [w for w in left + right if w in graph.in_emb]
    scored = []
    for cand, s1 in neighbors:
        s2 = s2_score(cand, context, graph.in_emb, graph.out_emb) if context else 0.0
        scored.append(
            ScoredCandidate(cand, s1, s2, cfg.lam * s1 + (1.0 - cfg.lam) * s2)
        )
    scored.sort(key=lambda c: (-c.score, c.phrase))
    return scored[: cfg.top_m]


# -- sentence expansion --------------------------------------------------------


@dataclass
class AnnotatedSentence:
    tokens: list[str]
    modifiers: list[tuple[int, int]] = field(default_factory=list)
    pos: list[str] = field(default_factory=list)


def load_annotations(path: str | Path) -> list[AnnotatedSentence]:
    """Read JSONL annotations {tokens, modifiers, pos}; errors carry line numbers."""
    out = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            tokens = list(obj["tokens"])
            modifiers = [(int(a), int(b)) for a, b in obj.get("modifiers", [])]
            pos = list(obj.get("pos", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(str(exc), line=lineno)
        for a, b in modifiers:
            if b < 1 or a < 0 or a + b > len(tokens):
                raise AnnotationError(f"modifier span {(a, b)} out of range", line=lineno)
        if pos and len(pos) != len(tokens):
            raise AnnotationError("pos tags must align with tokens", line=lineno)
        out.append(AnnotatedSentence(tokens, modifiers, pos))
    return out


def skeleton_pairs(
    annotated: Sequence[AnnotatedSentence],
    seed: int,
    drop_rate: float = 0.5,
) -> list[tuple[list[str], list[str]]]:
    """(skeleton, sentence) pairs by dropping a random subset of modifiers."""
    if not (0.0 <= drop_rate <= 1.0):
        raise InvalidArgumentError("drop_rate must lie in [0, 1]")
    rng = split_rng(seed, "skeleton")
    pairs = []
    for sent in annotated:
        chosen = [m for m in sent.modifiers if rng.random() < drop_rate]
        drop = set()
        for a, b in chosen:
            drop.update(range(a, a + b))
        if len(drop) == len(sent.tokens) and chosen:
            a, b = chosen[0]
            drop.difference_update(range(a, a + b))
        skeleton = [t for i, t in enumerate(sent.tokens) if i not in drop]
        pairs.append((skeleton, list(sent.tokens)))
    return pairs


NOUN_TAGS = {"NOUN", "NN", "NNS", "PROPN"}
ADJ_TAGS = {"ADJ", "JJ"}
PUNCT_TAGS = {"PUNCT", "."}


def select_spaces(tokens: Sequence[str], pos_tags: Sequence[str]) -> list[int]:
    """Gap indices for [MASK] insertion: before the first bare noun, after a
    sentence-final noun phrase; at most two sites."""
    if len(tokens) != len(pos_tags):
        raise InvalidArgumentError("pos tags must align with tokens")
    sites: list[int] = []
    for i, tag in enumerate(pos_tags):
        if tag in NOUN_TAGS and (i == 0 or pos_tags[i - 1] not in ADJ_TAGS):
            sites.append(i)
            break
    last = len(tokens) - 1
    while last >= 0 and pos_tags[last] in PUNCT_TAGS:
        last -= 1
    if last >= 0 and pos_tags[last] in NOUN_TAGS:
        gap = last + 1
        if gap not in sites:
            sites.append(gap)
    return sites[:2]


def local_expand(
    tokens: Sequence[str],
    pos_tags: Sequence[str],
    infill_model,
    cfg: DecoderConfig | None = None,
) -> tuple[list[str], list[tuple[int, int]]]:
    """Insert modifiers at selected sites; the source tokens survive in order.

    Returns the expanded sentence and the (position, length) spans of the
    inserted material within it.  No eligible site returns the input
    unchanged with an empty span list.
    """
    tokens = list(tokens)
    sites = select_spaces(tokens, pos_tags)
    if not sites:
        return tokens, []
    probe: list[str] = []
    for i, tok in enumerate(tokens):
        if i in sites:
            probe.append(MASK)
        probe.append(tok)
    if len(tokens) in sites:
        probe.append(MASK)

    cfg = cfg or DecoderConfig(strategy="greedy", max_new_tokens=24)
    frame = [BLANK if t == MASK else t for t in probe]
    try:
        sentences, _ = fill_blanks(infill_model, frame, cfg, n_candidates=1)
    except IncompleteGenerationError:
        return tokens, []
    if not sentences:
        return tokens, []
    expanded = sentences[0]
    spans = _inserted_spans(tokens, expanded)
    if spans is None:
        return tokens, []
    return expanded, spans


def _inserted_spans(
    original: list[str], expanded: list[str]
) -> list[tuple[int, int]] | None:
    """Spans of expanded not matched by an in-order walk of original."""
    spans: list[tuple[int, int]] = []
    j = 0
    run_start = None
    for i, tok in enumerate(expanded):
        if j < len(original) and tok == original[j]:
            if run_start is not None:
                spans.append((run_start, i - run_start))
                run_start = None
            j += 1
        elif run_start is None:
            run_start = i
    if run_start is not None:
        spans.append((run_start, len(expanded) - run_start))
    if j != len(original):
        return None
    return spans


def expansion_probe(tokens: Sequence[str], pos_tags: Sequence[str]) -> list[str]:
    """The masked probe string local expansion sends to the infiller."""
    tokens = list(tokens)
    sites = select_spaces(tokens, pos_tags)
    probe: list[str] = []
    for i, tok in enumerate(tokens):
        if i in sites:
            probe.append(MASK)
        probe.append(tok)
    if len(tokens) in sites:
        probe.append(MASK)
    return probe
