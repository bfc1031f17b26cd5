"""Evaluation metrics: diversity, novelty, sentence-level PRF, diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import InvalidArgumentError


@dataclass
class PrfScores:
    accuracy: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class EvalReport:
    """Container for the evaluation CLI; keys are fixed for CI diffing."""

    distinct: dict[int, float] = field(default_factory=dict)
    novelty: float | None = None
    detection: PrfScores | None = None
    correction: PrfScores | None = None
    gen_ppl: float | None = None
    coherence: float | None = None

    def as_dict(self) -> dict:
        return {
            "distinct": {str(n): v for n, v in sorted(self.distinct.items())},
            "novelty": self.novelty,
            "detection": self.detection.as_dict() if self.detection else None,
            "correction": self.correction.as_dict() if self.correction else None,
            "gen_ppl": self.gen_ppl,
            "coherence": self.coherence,
        }


def distinct_n(outputs: Sequence[Sequence], n: int) -> float:
    """Unique n-grams across the output set over total n-grams; empty -> 0."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    total = 0
    unique = set()
    for seq in outputs:
        seq = list(seq)
        for i in range(len(seq) - n + 1):
            unique.add(tuple(seq[i : i + n]))
            total += 1
    return len(unique) / total if total else 0.0


def novelty(keyword_input: Sequence, output: Sequence) -> float:
    """Fraction of output tokens not consumed by an in-order keyword match."""
    output = list(output)
    if not output:
        raise InvalidArgumentError("output must be nonempty")
    keywords = list(keyword_input)
    matched = 0
    j = 0
    for tok in output:
        if j < len(keywords) and tok == keywords[j]:
            matched += 1
            j += 1
    return (len(output) - matched) / len(output)


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def _mismatch_positions(a: Sequence, b: Sequence) -> set[int]:
    return {i for i, (x, y) in enumerate(zip(a, b)) if x != y}


def sentence_prf(
    gold: Sequence[tuple[Sequence, Sequence]], hyp: Sequence[Sequence]
) -> tuple[PrfScores, PrfScores]:
    """Sentence-level detection and correction scores.

    ``gold`` pairs are (source, target); ``hyp`` is the system output per
    source.  A sentence is flagged when hyp differs from source, errored when
    target differs from source.  Detection credits a flagged-and-errored
    sentence whose flagged positions equal the gold error positions (position
    sets compare only when lengths allow); correction credits hyp == target.
    """
    if len(gold) != len(hyp):
        raise InvalidArgumentError("gold and hyp lists must align")
    n = len(gold)
    det_tp = det_flagged = det_errored = det_correct = 0
    cor_tp = cor_flagged = cor_errored = cor_correct = 0
    for (src, tgt), out in zip(gold, hyp):
        src, tgt, out = list(src), list(tgt), list(out)
        flagged = out != src
        errored = tgt != src
        if flagged:
            det_flagged += 1
            cor_flagged += 1
        if errored:
            det_errored += 1
            cor_errored += 1
        same_shape = len(out) == len(src) == len(tgt)
        det_hit = (
            flagged
            and errored
            and (
                _mismatch_positions(out, src) == _mismatch_positions(tgt, src)
                if same_shape
                else True
            )
        )
        cor_hit = errored and out == tgt
        if det_hit:
            det_tp += 1
        if cor_hit:
            cor_tp += 1
        if det_hit or (not flagged and not errored):
            det_correct += 1
        if cor_hit or (not errored and out == src):
            cor_correct += 1
    detection = PrfScores(
        accuracy=det_correct / n if n else 0.0,
        precision=det_tp / det_flagged if det_flagged else 0.0,
        recall=det_tp / det_errored if det_errored else 0.0,
    )
    detection.f1 = _f1(detection.precision, detection.recall)
    correction = PrfScores(
        accuracy=cor_correct / n if n else 0.0,
        precision=cor_tp / cor_flagged if cor_flagged else 0.0,
        recall=cor_tp / cor_errored if cor_errored else 0.0,
    )
    correction.f1 = _f1(correction.precision, correction.recall)
    return detection, correction


def gen_diagnostics(
    prefix: Sequence[int], continuation: Sequence[int], eval_model
) -> dict[str, float]:
    """Diversity / coherence / perplexity diagnostics for one continuation.

    div is distinct-2 of the continuation; coh the cosine between mean-pooled
    representations of prefix and continuation; gen_ppl the perplexity of the
    continuation given the prefix under ``eval_model``.
    """
    prefix = [int(t) for t in prefix]
    continuation = [int(t) for t in continuation]
    if not continuation:
        raise InvalidArgumentError("continuation must be nonempty")
    div = distinct_n([continuation], 2)

    full = prefix + continuation
    with T.no_grad():
        hidden = eval_model.encode(full).data
        logits = eval_model.logits(full)
        logp = T.log_softmax(logits, axis=-1).data
    pool_prefix = hidden[: len(prefix)].mean(axis=0)
    pool_cont = hidden[len(prefix) :].mean(axis=0)
    denom = np.linalg.norm(pool_prefix) * np.linalg.norm(pool_cont)
    coh = float(np.clip(pool_prefix @ pool_cont / denom, -1.0, 1.0))

    nll = 0.0
    for t in range(len(prefix), len(full)):
        nll -= logp[t - 1, full[t]]
    gen_ppl = float(np.exp(nll / len(continuation)))
    return {"div": div, "coh": coh, "gen_ppl": gen_ppl}
