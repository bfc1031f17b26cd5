"""Non-autoregressive error correction.

Substitutions go through a same-length CRF over the vocabulary: emissions
come from a bidirectional encoder, transitions from the low-rank product
E1 @ E2^T.  The normalizer is computed exactly by the forward algorithm or
approximately by visiting only the top-k labels per step; the per-step
kept sets rank labels by emission plus best incoming transition, which is
independent of the beam so kept sets nest as k grows.

Insertions and deletions are proposed by a masked-prediction model whose
vocabulary includes a token meaning "no word belongs here": probing a gap
that predicts a real word suggests an insertion, probing a word whose
best prediction is the no-word token suggests a deletion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import InvalidArgumentError
from .lm import MaskedLm, Transformer, train_masked
from .optim import Adam
from .rng import split_rng
from .tensor import Tensor
from .vocab import Vocab

__all__ = [
    "CrfConfig",
    "CrfModel",
    "Edit",
    "NullDetectorModel",
    "apply_edits",
    "correct_substitutions",
    "crf_log_likelihood",
    "crf_losses",
    "build_null_instances",
    "null_detect",
    "train_crf",
    "train_null_tasks",
    "viterbi_decode",
]


@dataclass
class CrfConfig:
    gamma: float = 0.5
    viterbi_k: int = 8
    losses: str = "both"  # "dp" | "crf" | "both"
    focal: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidArgumentError("gamma must be nonnegative")
        if self.viterbi_k < 1:
            raise InvalidArgumentError("viterbi_k must be >= 1")
        if self.losses not in ("dp", "crf", "both"):
            raise InvalidArgumentError(f"unknown losses mode {self.losses!r}")


@dataclass
class Edit:
    kind: str  # "substitute" | "insert" | "delete"
    position: int
    old: str | None = None
    new: str | None = None
    score: float = 0.0

    def __post_init__(self):
        if self.kind == "substitute" and (self.old is None or self.new is None):
            raise InvalidArgumentError("substitute needs old and new")
        if self.kind == "insert" and (self.new is None or self.old is not None):
            raise InvalidArgumentError("insert needs new only")
        if self.kind == "delete" and (self.old is None or self.new is not None):
            raise InvalidArgumentError("delete needs old only")
        if self.kind not in ("substitute", "insert", "delete"):
            raise InvalidArgumentError(f"unknown edit kind {self.kind!r}")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "pos": self.position,
            "old": self.old,
            "new": self.new,
            "score": self.score,
        }


def apply_edits(tokens: Sequence[str], edits: Sequence[Edit]) -> list[str]:
    """Apply edits whose positions refer to the original token sequence."""
    out = list(tokens)
    for e in sorted(edits, key=lambda e: (-e.position, e.kind)):
        if e.kind == "substitute":
            out[e.position] = e.new
        elif e.kind == "delete":
            del out[e.position]
        else:
            out.insert(e.position, e.new)
    return out


class CrfModel:
    """Bidirectional encoder + emission head + low-rank transition factors."""

    def __init__(
        self,
        vocab: Vocab,
        d: int = 64,
        n_layers: int = 2,
        n_heads: int = 2,
        l_max: int = 128,
        d_m: int = 8,
        seed: int = 0,
    ):
        if d_m > len(vocab):
            raise InvalidArgumentError("d_m must not exceed the vocab size")
        self.vocab = vocab
        self.d = d
        self.d_m = d_m
        self.l_max = l_max
        self.core = Transformer(len(vocab), d, l_max, n_layers, n_heads, False, seed)
        rng = split_rng(seed, "crf-head")
        v = len(vocab)
        self.emit_w = Tensor(rng.normal(0.0, 0.02, (d, v)), requires_grad=True)
        self.emit_b = Tensor(np.zeros(v), requires_grad=True)
        self.e1 = Tensor(rng.normal(0.0, 0.1, (v, d_m)), requires_grad=True)
        self.e2 = Tensor(rng.normal(0.0, 0.1, (v, d_m)), requires_grad=True)
        self.params: dict[str, Tensor] = dict(self.core.params)
        self.params.update(
            {"emit_w": self.emit_w, "emit_b": self.emit_b, "e1": self.e1, "e2": self.e2}
        )

    @property
    def n_layers(self) -> int:
        return self.core.n_layers

    @property
    def n_heads(self) -> int:
        return self.core.n_heads

    def emissions(self, ids: np.ndarray) -> Tensor:
        """Per-position label logits (B, T, |V|)."""
        hidden = self.core.forward(ids)
        return T.add(T.matmul(hidden, self.emit_w), self.emit_b)

    def transitions(self) -> Tensor:
        """Transition score matrix (|V|, |V|) as E1 @ E2^T."""
        return T.matmul(self.e1, T.transpose(self.e2, (1, 0)))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def _kept_sets(s: np.ndarray, m: np.ndarray, k: int) -> list[np.ndarray]:
    """Per-step top-k label sets by emission + best incoming transition.

    The ranking ignores accumulated path scores, so the sets are nested in k:
    k = |V| reproduces the exact recursion and the best-path score cannot
    decrease when k grows.
    """
    t_len, v = s.shape
    k = min(k, v)
    best_in = m.max(axis=0)
    kept = []
    for t in range(t_len):
        sigma = s[t] if t == 0 else s[t] + best_in
        ids = np.argsort(-sigma, kind="stable")[:k]
        kept.append(np.sort(ids))
    return kept


def _ids_for(m: CrfModel, tokens: Sequence) -> np.ndarray:
    if len(tokens) and isinstance(tokens[0], str):
        return np.asarray(m.vocab.encode(list(tokens)), dtype=np.int64)
    return np.asarray(list(tokens), dtype=np.int64)


def _select_cols(t: Tensor, cols: np.ndarray) -> Tensor:
    """Column gather for a 2-D tensor."""
    return T.transpose(T.take_rows(T.transpose(t, (1, 0)), cols), (1, 0))


def _log_z_exact(s: Tensor, m: Tensor) -> Tensor:
    t_len = s.shape[0]
    alpha = T.reshape(T.take_rows(s, np.array([0])), (s.shape[1],))
    for t in range(1, t_len):
        row = T.reshape(T.take_rows(s, np.array([t])), (s.shape[1],))
        prev = T.reshape(alpha, (s.shape[1], 1))
        alpha = T.add(T.logsumexp(T.add(prev, m), axis=0), row)
    return T.logsumexp(alpha, axis=0)


def _log_z_truncated(s: Tensor, m: Tensor, kept: list[np.ndarray]) -> Tensor:
    t_len = s.shape[0]
    row = T.reshape(T.take_rows(s, np.array([0])), (s.shape[1],))
    alpha = T.take_rows(row, kept[0])
    for t in range(1, t_len):
        row = T.reshape(T.take_rows(s, np.array([t])), (s.shape[1],))
        emit = T.take_rows(row, kept[t])
        trans = _select_cols(T.take_rows(m, kept[t - 1]), kept[t])
        prev = T.reshape(alpha, (len(kept[t - 1]), 1))
        alpha = T.add(T.logsumexp(T.add(prev, trans), axis=0), emit)
    return T.logsumexp(alpha, axis=0)


def crf_log_likelihood(
    m: CrfModel,
    x: Sequence,
    y: Sequence,
    exact: bool = True,
    k: int | None = None,
) -> Tensor:
    """log P(y | x) under the CRF; exact or truncated normalizer."""
    x_ids = _ids_for(m, x)
    y_ids = _ids_for(m, y)
    if x_ids.size != y_ids.size:
        raise InvalidArgumentError("input and label sequences must align")
    if x_ids.size == 0:
        raise InvalidArgumentError("empty sequence")
    s = T.reshape(m.emissions(x_ids[None, :]), (x_ids.size, len(m.vocab)))
    trans = m.transitions()
    positions = np.arange(x_ids.size)
    score = T.tsum(T.take_last_axis(T.take_rows(s, positions), y_ids))
    if x_ids.size > 1:
        pair_scores = T.take_last_axis(T.take_rows(trans, y_ids[:-1]), y_ids[1:])
        score = T.add(score, T.tsum(pair_scores))
    if exact:
        log_z = _log_z_exact(s, trans)
    else:
        kept = _kept_sets(s.data, trans.data, k or len(m.vocab))
        log_z = _log_z_truncated(s, trans, kept)
    return T.sub(score, log_z)


def viterbi_decode(m: CrfModel, x: Sequence, k: int | None = None) -> list[int]:
    """Best label sequence under the CRF, visiting top-k labels per step.

    Ties resolve to the lowest token id at every step.
    """
    x_ids = _ids_for(m, x)
    if x_ids.size == 0:
        raise InvalidArgumentError("empty sequence")
    with T.no_grad():
        s = m.emissions(x_ids[None, :]).data[0]
        trans = m.transitions().data
    kept = _kept_sets(s, trans, k or len(m.vocab))
    t_len = x_ids.size
    delta = s[0][kept[0]]
    back: list[np.ndarray] = []
    for t in range(1, t_len):
        prev_ids, cur_ids = kept[t - 1], kept[t]
        cand = delta[:, None] + trans[np.ix_(prev_ids, cur_ids)]
        best = cand.argmax(axis=0)
        back.append(best)
        delta = cand[best, np.arange(len(cur_ids))] + s[t][cur_ids]
    pos = int(delta.argmax())
    path = [int(kept[-1][pos])]
    for t in range(t_len - 1, 0, -1):
        pos = int(back[t - 1][pos])
        path.append(int(kept[t - 1][pos]))
    path.reverse()
    return path


def viterbi_best_score(m: CrfModel, x: Sequence, k: int | None = None) -> float:
    """Path score of the truncated-Viterbi argmax (emissions + transitions)."""
    path = viterbi_decode(m, x, k)
    x_ids = _ids_for(m, x)
    with T.no_grad():
        s = m.emissions(x_ids[None, :]).data[0]
        trans = m.transitions().data
    total = float(sum(s[t, y] for t, y in enumerate(path)))
    total += float(sum(trans[path[t - 1], path[t]] for t in range(1, len(path))))
    return total


def crf_losses(
    m: CrfModel,
    x: Sequence,
    y: Sequence,
    cfg: CrfConfig,
    exact: bool = True,
) -> dict[str, Tensor]:
    """All loss variants for one (input, target) pair.

    dp sums per-position NLL of the emission softmax; crf is the sequence
    NLL; the focal forms scale each NLL by (1 - P)^gamma.
    """
    if cfg.gamma < 0:
        raise InvalidArgumentError("gamma must be nonnegative")
    x_ids = _ids_for(m, x)
    y_ids = _ids_for(m, y)
    if x_ids.size != y_ids.size:
        raise InvalidArgumentError("input and label sequences must align")
    s = T.reshape(m.emissions(x_ids[None, :]), (x_ids.size, len(m.vocab)))
    logp = T.log_softmax(s, axis=-1)
    picked = T.take_last_axis(logp, y_ids)
    dp = T.mul(T.tsum(picked), Tensor(-1.0))
    p_dp = T.exp(picked)
    focal_w = T.power(T.sub(Tensor(1.0), p_dp), cfg.gamma)
    dp_focal = T.mul(T.tsum(T.mul(focal_w, picked)), Tensor(-1.0))

    log_p_crf = crf_log_likelihood(m, x_ids, y_ids, exact=exact, k=cfg.viterbi_k)
    crf = T.mul(log_p_crf, Tensor(-1.0))
    p_crf = T.exp(log_p_crf)
    crf_focal = T.mul(
        T.mul(T.power(T.sub(Tensor(1.0), p_crf), cfg.gamma), log_p_crf), Tensor(-1.0)
    )
    return {
        "dp": dp,
        "crf": crf,
        "dp_focal": dp_focal,
        "crf_focal": crf_focal,
        "total": T.add(dp, crf),
        "total_focal": T.add(dp_focal, crf_focal),
    }


def _batched_crf_loss(
    m: CrfModel, xs: np.ndarray, ys: np.ndarray, cfg: CrfConfig
) -> Tensor:
    """Mean training loss over a same-length batch, honoring cfg.losses/focal."""
    b, t_len = xs.shape
    v = len(m.vocab)
    s = m.emissions(xs)
    trans = m.transitions()
    terms: list[Tensor] = []

    if cfg.losses in ("dp", "both"):
        logp = T.log_softmax(s, axis=-1)
        picked = T.take_last_axis(logp, ys)
        if cfg.focal:
            w = T.power(T.sub(Tensor(1.0), T.exp(picked)), cfg.gamma)
            per_seq = T.tsum(T.mul(w, picked), axis=1)
        else:
            per_seq = T.tsum(picked, axis=1)
        terms.append(T.mul(T.tmean(per_seq), Tensor(-1.0)))

    if cfg.losses in ("crf", "both"):
        flat = T.reshape(s, (b * t_len, v))
        emit_gather = T.reshape(
            T.take_last_axis(flat, ys.reshape(-1)), (b, t_len)
        )
        score = T.tsum(emit_gather, axis=1)
        if t_len > 1:
            pair = T.take_last_axis(
                T.take_rows(trans, ys[:, :-1].reshape(-1)), ys[:, 1:].reshape(-1)
            )
            score = T.add(score, T.tsum(T.reshape(pair, (b, t_len - 1)), axis=1))
        alpha = T.reshape(
            T.take_rows(T.transpose(s, (1, 0, 2)), np.array([0])), (b, v)
        )
        for t in range(1, t_len):
            row = T.reshape(
                T.take_rows(T.transpose(s, (1, 0, 2)), np.array([t])), (b, v)
            )
            prev = T.reshape(alpha, (b, v, 1))
            alpha = T.add(
                T.logsumexp(T.add(prev, T.reshape(trans, (1, v, v))), axis=1), row
            )
        log_z = T.logsumexp(alpha, axis=1)
        log_p = T.sub(score, log_z)
        if cfg.focal:
            w = T.power(T.sub(Tensor(1.0), T.exp(log_p)), cfg.gamma)
            terms.append(T.mul(T.tmean(T.mul(w, log_p)), Tensor(-1.0)))
        else:
            terms.append(T.mul(T.tmean(log_p), Tensor(-1.0)))

    total = terms[0]
    for extra in terms[1:]:
        total = T.add(total, extra)
    return total


def train_crf(
    pairs: list[tuple[list[str], list[str]]],
    vocab: Vocab | None = None,
    cfg: CrfConfig | None = None,
    epochs: int = 5,
    batch_size: int = 32,
    learning_rate: float = 2e-3,
    seed: int = 0,
    d: int = 32,
    n_layers: int = 1,
    n_heads: int = 2,
    l_max: int = 64,
    d_m: int = 8,
) -> CrfModel:
    """Fit the substitution CRF on (noisy, clean) same-length pairs."""
    if not pairs:
        raise InvalidArgumentError("empty training set")
    cfg = cfg or CrfConfig()
    if vocab is None:
        vocab = Vocab.build([list(x) + list(y) for x, y in pairs])
    model = CrfModel(
        vocab, d=d, n_layers=n_layers, n_heads=n_heads, l_max=l_max, d_m=d_m, seed=seed
    )
    encoded = []
    for x, y in pairs:
        xi, yi = vocab.encode(list(x)), vocab.encode(list(y))
        if len(xi) != len(yi):
            raise InvalidArgumentError("substitution pairs must be same-length")
        encoded.append((np.asarray(xi, np.int64), np.asarray(yi, np.int64)))
    opt = Adam(model.params, learning_rate)
    order = np.arange(len(encoded))
    for epoch in range(epochs):
        rng = split_rng(seed, f"crf-epoch:{epoch}")
        rng.shuffle(order)
        by_len: dict[int, list[int]] = {}
        for i in order:
            by_len.setdefault(len(encoded[i][0]), []).append(i)
        for _, idxs in sorted(by_len.items()):
            for start in range(0, len(idxs), batch_size):
                chunk = idxs[start : start + batch_size]
                xs = np.stack([encoded[i][0] for i in chunk])
                ys = np.stack([encoded[i][1] for i in chunk])
                opt.zero_grad()
                loss = _batched_crf_loss(model, xs, ys, cfg)
                loss.backward()
                opt.step()
    return model


def correct_substitutions(
    m: CrfModel, sentence: Sequence[str], k: int | None = None
) -> tuple[list[str], list[Edit]]:
    """Viterbi-decode a corrected sentence and report differing positions."""
    tokens = list(sentence)
    ids = viterbi_decode(m, tokens, k)
    corrected = m.vocab.decode(ids)
    edits = [
        Edit("substitute", i, old=a, new=b)
        for i, (a, b) in enumerate(zip(tokens, corrected))
        if a != b
    ]
    return corrected, edits


# -- insertion / deletion detection ------------------------------------------


@dataclass
class NullDetectorModel:
    """Masked predictor whose vocabulary includes the no-word token.

    Probes are windowed: the model judges a site from up to ``window``
    tokens on each side, which keeps the insert/delete question local.
    """

    masked: MaskedLm
    tau_ins: float = 0.5
    tau_del: float = 0.5
    window: int = 3

    @property
    def vocab(self) -> Vocab:
        return self.masked.vocab


def _crop(ids: list[int], pos: int, window: int) -> tuple[list[int], int]:
    lo = max(0, pos - window)
    return ids[lo : pos + window + 1], pos - lo


def build_null_instances(
    corpus: list[list[str]],
    insert_rate: float,
    mask_rate: float,
    seed: int,
    vocab: Vocab,
    n_instances: int | None = None,
    window: int = 3,
) -> list[tuple[list[int], int, int]]:
    """Masked-prediction instances mixing gap probes and word probes.

    Each draw is a gap probe (target: the no-word token) with probability
    insert_rate / (insert_rate + mask_rate), else a word probe (target: the
    hidden word).  Instances are cropped to ``window`` tokens around the
    masked site.
    """
    if not corpus:
        raise InvalidArgumentError("empty corpus")
    if not (0 < insert_rate < 1) or not (0 < mask_rate < 1):
        raise InvalidArgumentError("rates must lie in (0, 1)")
    n = n_instances if n_instances is not None else len(corpus)
    p_gap = insert_rate / (insert_rate + mask_rate)
    rng = split_rng(seed, "null-tasks")
    mask_id = vocab.mask_id
    null_id = vocab.null_id
    out: list[tuple[list[int], int, int]] = []
    for j in range(n):
        ids = vocab.encode(corpus[j % len(corpus)])
        if rng.random() < p_gap:
            g = int(rng.integers(0, len(ids) + 1))
            probe, at = _crop(ids[:g] + [mask_id] + ids[g:], g, window)
            out.append((probe, at, null_id))
        else:
            i = int(rng.integers(0, len(ids)))
            probe, at = _crop(ids[:i] + [mask_id] + ids[i + 1 :], i, window)
            out.append((probe, at, ids[i]))
    return out


def train_null_tasks(
    corpus: list[list[str]],
    insert_rate: float,
    mask_rate: float,
    seed: int,
    vocab: Vocab | None = None,
    n_instances: int | None = None,
    tau_ins: float = 0.5,
    tau_del: float = 0.5,
    window: int = 3,
    **train_kwargs,
) -> NullDetectorModel:
    """Train the insertion/deletion detector on synthetic masked tasks."""
    if vocab is None:
        vocab = Vocab.build(corpus)
    instances = build_null_instances(
        corpus, insert_rate, mask_rate, seed, vocab, n_instances, window=window
    )
    masked = train_masked(instances, vocab, seed=seed, **train_kwargs)
    return NullDetectorModel(masked, tau_ins=tau_ins, tau_del=tau_del, window=window)


def pseudo_log_likelihood(
    m: MaskedLm, tokens: Sequence[str], window: int | None = None
) -> float:
    """Mean masked log-probability of each token given its context.

    ``window`` crops each probe to the neighborhood the model was trained
    on; None probes with the whole sequence.
    """
    ids = m.vocab.encode(list(tokens))
    if not ids:
        raise InvalidArgumentError("tokens must be nonempty")
    total = 0.0
    for i, true_id in enumerate(ids):
        probe = ids[:i] + [m.vocab.mask_id] + ids[i + 1 :]
        at = i
        if window is not None:
            probe, at = _crop(probe, i, window)
        dist = m.predict_dist(probe, at)
        total += float(np.log(max(dist[true_id], 1e-300)))
    return total / len(ids)


def best_repair(
    m: NullDetectorModel, sentence: Sequence[str], edits: Sequence[Edit]
) -> list[str]:
    """Apply the single proposed edit the masked model likes best.

    Candidates are the sentence itself plus each one-edit application,
    ranked by pseudo log-likelihood; ties keep the earlier candidate.
    Useful when errors are known to be isolated.
    """
    tokens = list(sentence)
    if not edits:
        return tokens
    candidates = [tokens] + [apply_edits(tokens, [e]) for e in edits]
    scored = [
        (pseudo_log_likelihood(m.masked, c, window=m.window), -i)
        for i, c in enumerate(candidates)
    ]
    best = max(range(len(candidates)), key=lambda i: scored[i])
    return candidates[best]


def null_detect(m: NullDetectorModel, sentence: Sequence[str]) -> list[Edit]:
    """Propose insert/delete edits by probing gaps and words with [MASK]."""
    tokens = list(sentence)
    if not tokens:
        raise InvalidArgumentError("sentence must be nonempty")
    vocab = m.vocab
    ids = vocab.encode(tokens)
    mask_id, null_id = vocab.mask_id, vocab.null_id
    edits: list[Edit] = []
    for g in range(len(ids) + 1):
        probe, at = _crop(ids[:g] + [mask_id] + ids[g:], g, m.window)
        dist = m.masked.predict_dist(probe, at)
        top = int(np.argmax(dist))
        if top != null_id and float(dist[top]) > m.tau_ins:
            edits.append(
                Edit("insert", g, new=vocab.tokens[top], score=float(dist[top]))
            )
    for i in range(len(ids)):
        probe, at = _crop(ids[:i] + [mask_id] + ids[i + 1 :], i, m.window)
        dist = m.masked.predict_dist(probe, at)
        top = int(np.argmax(dist))
        if top == null_id and float(dist[null_id]) > m.tau_del:
            edits.append(
                Edit("delete", i, old=tokens[i], score=float(dist[null_id]))
            )
    return edits
