"""Decoding strategies over a causal LM.

The contrastive strategy re-scores the top-k likely candidates by how
similar their representation would be to every token already in the
context: score(v) = (1 - alpha) * p(v) - alpha * max_j cos(h_v, h_j),
with h_v computed by re-encoding context ++ v.  Each candidate costs one
full re-encode; correctness over speed at this scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import InvalidArgumentError, SequenceLengthError
from .lm import LmModel
from .metrics import distinct_n
from .rng import split_rng

STRATEGIES = ("greedy", "beam", "nucleus", "contrastive")


@dataclass
class DecoderConfig:
    strategy: str = "contrastive"
    k: int = 5
    alpha: float = 0.6
    beam_width: int = 4
    nucleus_p: float = 0.95
    max_new_tokens: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidArgumentError(f"unknown strategy {self.strategy!r}")
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidArgumentError("alpha must lie in [0, 1]")
        if self.k < 1:
            raise InvalidArgumentError("k must be >= 1")
        if self.beam_width < 1:
            raise InvalidArgumentError("beam_width must be >= 1")
        if not (0.0 < self.nucleus_p <= 1.0):
            raise InvalidArgumentError("nucleus_p must lie in (0, 1]")
        if self.max_new_tokens < 1:
            raise InvalidArgumentError("max_new_tokens must be >= 1")


@dataclass
class Candidate:
    token_id: int
    confidence: float
    penalty: float
    score: float


@dataclass
class StepTrace:
    candidates: list[Candidate]
    chosen: int


@dataclass
class DecodeTrace:
    tokens: list[int] = field(default_factory=list)
    steps: list[StepTrace] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "steps": [
                {
                    "chosen": s.chosen,
                    "candidates": [
                        {
                            "token_id": c.token_id,
                            "confidence": c.confidence,
                            "penalty": c.penalty,
                            "score": c.score,
                        }
                        for c in s.candidates
                    ],
                }
                for s in self.steps
            ],
        }


def _top_k_ids(probs: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest probabilities; ties resolve to lower ids."""
    order = np.argsort(-probs, kind="stable")
    return order[:k]


def contrastive_step(
    model: LmModel, context: Sequence[int], k: int, alpha: float
) -> tuple[int, list[Candidate]]:
    """One contrastive selection; returns the chosen id and candidate table."""
    context = list(context)
    if not context:
        raise InvalidArgumentError("context must be nonempty")
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    probs = model.next_dist(context)
    candidate_ids = _top_k_ids(probs, min(k, probs.size))
    with T.no_grad():
        history = model.encode(context).data
    history_n = history / np.linalg.norm(history, axis=1, keepdims=True)
    table: list[Candidate] = []
    for v in candidate_ids:
        with T.no_grad():
            h = model.encode(context + [int(v)]).data
        hv = h[-1]
        hv = hv / np.linalg.norm(hv)
        penalty = float(np.clip(history_n @ hv, -1.0, 1.0).max())
        score = (1.0 - alpha) * float(probs[v]) - alpha * penalty
        table.append(Candidate(int(v), float(probs[v]), penalty, score))
    best = min(table, key=lambda c: (-c.score, c.token_id))
    return best.token_id, table


def _greedy_step(model: LmModel, context: list[int]) -> tuple[int, list[Candidate]]:
    probs = model.next_dist(context)
    v = int(np.argmax(probs))
    return v, [Candidate(v, float(probs[v]), 0.0, float(probs[v]))]


def _nucleus_step(
    model: LmModel, context: list[int], p: float, rng: np.random.Generator
) -> tuple[int, list[Candidate]]:
    probs = model.next_dist(context)
    order = np.argsort(-probs, kind="stable")
    cum = np.cumsum(probs[order])
    cut = int(np.searchsorted(cum, p)) + 1
    kept = order[:cut]
    renorm = probs[kept] / probs[kept].sum()
    v = int(rng.choice(kept, p=renorm))
    table = [
        Candidate(int(i), float(probs[i]), 0.0, float(probs[i])) for i in kept
    ]
    return v, table


def _beam(
    model: LmModel, prefix: list[int], cfg: DecoderConfig, end_id: int
) -> tuple[list[int], DecodeTrace]:
    """Highest cumulative log-prob completion under a fixed beam width."""
    live: list[tuple[float, list[int]]] = [(0.0, [])]
    finished: list[tuple[float, list[int]]] = []
    for _ in range(cfg.max_new_tokens):
        expansions: list[tuple[float, list[int]]] = []
        for score, toks in live:
            probs = model.next_dist(prefix + toks)
            logp = np.log(np.maximum(probs, 1e-300))
            top = _top_k_ids(probs, cfg.beam_width)
            for v in top:
                expansions.append((score + float(logp[v]), toks + [int(v)]))
        expansions.sort(key=lambda e: (-e[0], e[1]))
        live = []
        for score, toks in expansions[: cfg.beam_width]:
            if toks[-1] == end_id:
                finished.append((score, toks))
            else:
                live.append((score, toks))
        if not live:
            break
    pool = finished + live
    pool.sort(key=lambda e: (-e[0], e[1]))
    best_score, best = pool[0]
    trace = DecodeTrace(tokens=list(best))
    for tok in best:
        trace.steps.append(StepTrace([Candidate(tok, 0.0, 0.0, best_score)], tok))
    return best, trace


def decode(
    model: LmModel,
    prefix: Sequence[int],
    cfg: DecoderConfig,
    stop=None,
) -> tuple[list[int], DecodeTrace]:
    """Generate up to ``max_new_tokens`` ids after ``prefix``.

    Generation stops early at the end marker ([CLS]), or as soon as the
    optional ``stop(generated_ids)`` predicate holds.  Returns the new ids
    (prefix excluded) and a per-step trace.
    """
    prefix = [int(t) for t in prefix]
    if not prefix:
        raise InvalidArgumentError("prefix must be nonempty")
    if len(prefix) + cfg.max_new_tokens > model.l_max:
        raise SequenceLengthError(
            f"prefix ({len(prefix)}) + budget ({cfg.max_new_tokens}) "
            f"exceeds l_max={model.l_max}"
        )
    end_id = model.vocab.cls_id
    if cfg.strategy == "beam":
        if stop is not None:
            raise InvalidArgumentError("beam search does not support stop predicates")
        return _beam(model, prefix, cfg, end_id)

    rng = split_rng(cfg.seed, "nucleus")
    trace = DecodeTrace()
    context = list(prefix)
    for _ in range(cfg.max_new_tokens):
        if cfg.strategy == "greedy":
            tok, table = _greedy_step(model, context)
        elif cfg.strategy == "nucleus":
            tok, table = _nucleus_step(model, context, cfg.nucleus_p, rng)
        else:
            tok, table = contrastive_step(model, context, cfg.k, cfg.alpha)
        trace.steps.append(StepTrace(table, tok))
        trace.tokens.append(tok)
        context.append(tok)
        if tok == end_id:
            break
        if stop is not None and stop(trace.tokens):
            break
    return trace.tokens, trace


def repetition_report(tokens: Sequence[int | str], n_values: Sequence[int]) -> dict:
    """Distinct ratios per n plus the longest n-gram that repeats."""
    tokens = list(tokens)
    if not tokens:
        raise InvalidArgumentError("tokens must be nonempty")
    distinct: dict[int, float] = {}
    skipped: list[int] = []
    for n in n_values:
        if n > len(tokens):
            skipped.append(n)
            continue
        distinct[n] = distinct_n([tokens], n)
    longest: tuple = ()
    for n in range(len(tokens) - 1, 0, -1):
        seen: set[tuple] = set()
        repeated = []
        for i in range(len(tokens) - n + 1):
            gram = tuple(tokens[i : i + n])
            if gram in seen:
                repeated.append(gram)
            seen.add(gram)
        if repeated:
            longest = min(repeated)
            break
    return {
        "distinct": distinct,
        "skipped_n": skipped,
        "longest_repeated_ngram": list(longest),
    }
