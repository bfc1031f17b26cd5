"""Tiny self-attention language models trained from scratch.

Two model flavors share one encoder stack:

* :class:`LmModel` — causal, next-token factorized; supports the plain
  likelihood objective, the representation-contrast objective, and their
  sum, selected through :class:`TrainConfig`.
* :class:`MaskedLm` — bidirectional, predicts a target token at a masked
  position; backs the insertion/deletion detector and the single-token
  fill baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import (
    InvalidArgumentError,
    SequenceLengthError,
)
from .optim import Adam
from .rng import split_rng
from .tensor import Tensor
from .vocab import CLS, SEP, Vocab

FRAME_T_SEP_S_CLS = "t_sep_s_cls"
FRAME_PREFIX_SEP = "prefix_sep"

_MASK_BIAS = -1e30


@dataclass
class TrainConfig:
    """Hyperparameters for :func:`train`; architecture knobs included."""

    objective: str = "mle"  # "mle" | "contrastive"
    rho: float = 0.5
    epochs: int = 10
    batch_size: int = 16
    seed: int = 0
    learning_rate: float = 1e-3
    d: int = 64
    n_layers: int = 2
    n_heads: int = 2
    l_max: int = 128

    def __post_init__(self):
        if self.objective not in ("mle", "contrastive"):
            raise InvalidArgumentError(f"unknown objective {self.objective!r}")
        if not (-1.0 <= self.rho <= 1.0):
            raise InvalidArgumentError("rho must lie in [-1, 1]")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise InvalidArgumentError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise InvalidArgumentError("learning_rate must be positive")
        if self.l_max < 2:
            raise InvalidArgumentError("l_max must be at least 2")
        if self.d % self.n_heads:
            raise InvalidArgumentError("d must be divisible by n_heads")


class Transformer:
    """Embeddings plus post-norm self-attention blocks, causal or not."""

    def __init__(
        self,
        vocab_size: int,
        d: int,
        l_max: int,
        n_layers: int,
        n_heads: int,
        causal: bool,
        seed: int,
    ):
        self.vocab_size = vocab_size
        self.d = d
        self.l_max = l_max
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.causal = causal
        self.params: dict[str, Tensor] = {}
        rng = split_rng(seed, "init")

        def normal(name: str, shape: tuple[int, ...]) -> None:
            self.params[name] = Tensor(
                rng.normal(0.0, 0.02, size=shape), requires_grad=True
            )

        def const(name: str, shape: tuple[int, ...], value: float) -> None:
            self.params[name] = Tensor(
                np.full(shape, value, dtype=np.float64), requires_grad=True
            )

        normal("tok_emb", (vocab_size, d))
        normal("pos_emb", (l_max, d))
        hidden = 4 * d
        for i in range(n_layers):
            p = f"layer{i}."
            normal(p + "wq", (d, d))
            normal(p + "wk", (d, d))
            normal(p + "wv", (d, d))
            normal(p + "wo", (d, d))
            const(p + "ln1_g", (d,), 1.0)
            const(p + "ln1_b", (d,), 0.0)
            normal(p + "w1", (d, hidden))
            const(p + "b1", (hidden,), 0.0)
            normal(p + "w2", (hidden, d))
            const(p + "b2", (d,), 0.0)
            const(p + "ln2_g", (d,), 1.0)
            const(p + "ln2_b", (d,), 0.0)

    def forward(self, ids: np.ndarray, key_mask: np.ndarray | None = None) -> Tensor:
        """Hidden states (B, T, d) for an int id batch (B, T).

        ``key_mask`` flags real (non-pad) positions; masked keys are hidden
        from attention.  Causality is enforced with an additive bias when the
        stack was built causal.
        """
        ids = np.asarray(ids)
        b, t = ids.shape
        if t > self.l_max:
            raise SequenceLengthError(f"sequence length {t} exceeds {self.l_max}")
        if ids.min() < 0 or ids.max() >= self.vocab_size:
            raise InvalidArgumentError("token id out of vocabulary range")
        p = self.params
        h = T.add(T.take_rows(p["tok_emb"], ids), T.first_rows(p["pos_emb"], t))

        bias = np.zeros((b, 1, t, t))
        if self.causal:
            bias = bias + np.triu(np.full((t, t), _MASK_BIAS), k=1)
        if key_mask is not None:
            bias = bias + np.where(key_mask, 0.0, _MASK_BIAS)[:, None, None, :]
        bias_t = Tensor(bias)

        dh = self.d // self.n_heads
        scale = Tensor(1.0 / np.sqrt(dh))
        for i in range(self.n_layers):
            pre = f"layer{i}."

            def heads(w: Tensor) -> Tensor:
                x = T.matmul(h, w)
                x = T.reshape(x, (b, t, self.n_heads, dh))
                return T.transpose(x, (0, 2, 1, 3))

            q = heads(p[pre + "wq"])
            k = heads(p[pre + "wk"])
            v = heads(p[pre + "wv"])
            scores = T.add(
                T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), scale), bias_t
            )
            att = T.softmax(scores, axis=-1)
            ctx = T.transpose(T.matmul(att, v), (0, 2, 1, 3))
            ctx = T.matmul(T.reshape(ctx, (b, t, self.d)), p[pre + "wo"])
            h = T.layer_norm(T.add(h, ctx), p[pre + "ln1_g"], p[pre + "ln1_b"])
            f = T.add(T.matmul(h, p[pre + "w1"]), p[pre + "b1"])
            f = T.add(T.matmul(T.gelu(f), p[pre + "w2"]), p[pre + "b2"])
            h = T.layer_norm(T.add(h, f), p[pre + "ln2_g"], p[pre + "ln2_b"])
        return h


class LmModel:
    """Causal LM: shared encoder plus an output projection over the vocab."""

    def __init__(
        self,
        vocab: Vocab,
        d: int = 64,
        n_layers: int = 2,
        n_heads: int = 2,
        l_max: int = 128,
        seed: int = 0,
    ):
        self.vocab = vocab
        self.d = d
        self.l_max = l_max
        self.core = Transformer(len(vocab), d, l_max, n_layers, n_heads, True, seed)
        rng = split_rng(seed, "head")
        self.out_proj = Tensor(
            rng.normal(0.0, 0.02, size=(d, len(vocab))), requires_grad=True
        )
        self.params: dict[str, Tensor] = dict(self.core.params)
        self.params["out_proj"] = self.out_proj
        self.training_log: dict[str, float] = {}

    @property
    def n_layers(self) -> int:
        return self.core.n_layers

    @property
    def n_heads(self) -> int:
        return self.core.n_heads

    def _check_ids(self, ids: Sequence[int]) -> np.ndarray:
        arr = np.asarray(list(ids), dtype=np.int64)
        if arr.size == 0:
            raise InvalidArgumentError("empty token sequence")
        if arr.size > self.l_max:
            raise SequenceLengthError(
                f"sequence length {arr.size} exceeds l_max={self.l_max}"
            )
        if arr.min() < 0 or arr.max() >= len(self.vocab):
            raise InvalidArgumentError("token id out of vocabulary range")
        return arr

    def encode(self, ids: Sequence[int]) -> Tensor:
        """Final-layer representations, one row per input position."""
        arr = self._check_ids(ids)
        h = self.core.forward(arr[None, :])
        return T.reshape(h, (arr.size, self.d))

    def logits(self, ids: Sequence[int]) -> Tensor:
        return T.matmul(self.encode(ids), self.out_proj)

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        """Distribution over the next token given a nonempty prefix."""
        with T.no_grad():
            lg = self.logits(prefix)
            probs = T.softmax(lg, axis=-1)
        return probs.data[-1]

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def _pad_batch(batch: list[np.ndarray], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    longest = max(len(s) for s in batch)
    ids = np.full((len(batch), longest), pad_id, dtype=np.int64)
    mask = np.zeros((len(batch), longest), dtype=bool)
    for i, s in enumerate(batch):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask


def _batch_hidden(model: LmModel, batch: list[np.ndarray]):
    ids, mask = _pad_batch(batch, model.vocab.pad_id)
    hidden = model.core.forward(ids, key_mask=mask)
    return ids, mask, hidden


def _mle_from_hidden(model, ids, mask, hidden) -> Tensor:
    b, t = ids.shape
    logits = T.matmul(hidden, model.out_proj)
    logp = T.log_softmax(logits, axis=-1)
    targets = np.zeros((b, t), dtype=np.int64)
    targets[:, :-1] = ids[:, 1:]
    weight = np.zeros((b, t))
    weight[:, :-1] = mask[:, 1:]
    picked = T.take_last_axis(logp, targets)
    per_seq = T.tsum(T.mul(picked, Tensor(weight)), axis=1)
    counts = weight.sum(axis=1)
    per_seq = T.mul(per_seq, Tensor(1.0 / counts))
    return T.mul(T.tmean(per_seq), Tensor(-1.0))


def _cl_from_hidden(batch, hidden, rho: float) -> Tensor:
    terms = []
    for i, seq in enumerate(batch):
        n = len(seq)
        if n < 2:
            raise InvalidArgumentError("contrast loss needs length >= 2")
        rows = T.reshape(T.take_rows(hidden, np.array([i])), hidden.shape[1:])
        rows = T.first_rows(rows, n)
        sims = T.pairwise_cosine(rows)
        hinge = T.relu(T.add(Tensor(rho - 1.0), sims))
        off_diag = Tensor(1.0 - np.eye(n))
        total = T.tsum(T.mul(hinge, off_diag))
        terms.append(T.mul(total, Tensor(1.0 / (n * (n - 1)))))
    acc = terms[0]
    for t in terms[1:]:
        acc = T.add(acc, t)
    return T.mul(acc, Tensor(1.0 / len(terms)))


def _validate_batch(model: LmModel, batch: list[Sequence[int]]) -> list[np.ndarray]:
    if not batch:
        raise InvalidArgumentError("empty batch")
    out = []
    for seq in batch:
        arr = model._check_ids(seq)
        if arr.size < 2:
            raise InvalidArgumentError("training sequences need length >= 2")
        out.append(arr)
    return out


def loss_mle(model: LmModel, batch: list[Sequence[int]]) -> Tensor:
    """Mean negative log-likelihood per predicted token, averaged over the batch."""
    seqs = _validate_batch(model, batch)
    ids, mask, hidden = _batch_hidden(model, seqs)
    return _mle_from_hidden(model, ids, mask, hidden)


def loss_cl(model: LmModel, batch: list[Sequence[int]], rho: float) -> Tensor:
    """Margin hinge over pairwise representation cosines, in [0, inf)."""
    if not (-1.0 <= rho <= 1.0):
        raise InvalidArgumentError("rho must lie in [-1, 1]")
    seqs = _validate_batch(model, batch)
    _, _, hidden = _batch_hidden(model, seqs)
    return _cl_from_hidden(seqs, hidden, rho)


def loss_combined(model: LmModel, batch: list[Sequence[int]], rho: float) -> Tensor:
    """Sum of the likelihood and contrast objectives over a shared forward pass."""
    if not (-1.0 <= rho <= 1.0):
        raise InvalidArgumentError("rho must lie in [-1, 1]")
    seqs = _validate_batch(model, batch)
    ids, mask, hidden = _batch_hidden(model, seqs)
    return T.add(
        _mle_from_hidden(model, ids, mask, hidden),
        _cl_from_hidden(seqs, hidden, rho),
    )


def _objective(model: LmModel, batch, cfg: TrainConfig) -> Tensor:
    if cfg.objective == "contrastive":
        return loss_combined(model, batch, cfg.rho)
    return loss_mle(model, batch)


def corpus_loss(model: LmModel, corpus: list[Sequence[int]], cfg: TrainConfig) -> float:
    total = 0.0
    for start in range(0, len(corpus), cfg.batch_size):
        chunk = corpus[start : start + cfg.batch_size]
        total += float(_objective(model, chunk, cfg).data) * len(chunk)
    return total / len(corpus)


def train(
    corpus: list[list[str]] | list[list[int]],
    cfg: TrainConfig,
    vocab: Vocab | None = None,
) -> LmModel:
    """Train an :class:`LmModel` from scratch; deterministic in (corpus, cfg)."""
    if not corpus:
        raise InvalidArgumentError("empty corpus")
    if vocab is None:
        first = next((s for s in corpus if len(s)), None)
        if first is None or not isinstance(first[0], str):
            raise InvalidArgumentError("id corpus requires an explicit vocab")
        vocab = Vocab.build(corpus)
    encoded = [
        np.asarray(vocab.encode(s) if s and isinstance(s[0], str) else s, np.int64)
        for s in corpus
    ]
    for s in encoded:
        if s.size > cfg.l_max:
            raise SequenceLengthError("corpus sequence exceeds l_max")
        if s.size < 2:
            raise InvalidArgumentError("corpus sequences need length >= 2")

    model = LmModel(
        vocab,
        d=cfg.d,
        n_layers=cfg.n_layers,
        n_heads=cfg.n_heads,
        l_max=cfg.l_max,
        seed=cfg.seed,
    )
    opt = Adam(model.params, cfg.learning_rate)
    with T.no_grad():
        initial = corpus_loss(model, encoded, cfg)
    order = np.arange(len(encoded))
    for epoch in range(cfg.epochs):
        rng = split_rng(cfg.seed, f"epoch:{epoch}")
        rng.shuffle(order)
        for start in range(0, len(order), cfg.batch_size):
            chunk = [encoded[i] for i in order[start : start + cfg.batch_size]]
            opt.zero_grad()
            loss = _objective(model, chunk, cfg)
            loss.backward()
            opt.step()
    with T.no_grad():
        final = corpus_loss(model, encoded, cfg)
    model.training_log = {"initial_loss": initial, "final_loss": final}
    return model


class MaskedLm:
    """Bidirectional masked-position predictor over the same encoder stack."""

    def __init__(
        self,
        vocab: Vocab,
        d: int = 64,
        n_layers: int = 2,
        n_heads: int = 2,
        l_max: int = 128,
        seed: int = 0,
    ):
        self.vocab = vocab
        self.d = d
        self.l_max = l_max
        self.core = Transformer(len(vocab), d, l_max, n_layers, n_heads, False, seed)
        rng = split_rng(seed, "head")
        self.out_proj = Tensor(
            rng.normal(0.0, 0.02, size=(d, len(vocab))), requires_grad=True
        )
        self.params: dict[str, Tensor] = dict(self.core.params)
        self.params["out_proj"] = self.out_proj

    @property
    def n_layers(self) -> int:
        return self.core.n_layers

    @property
    def n_heads(self) -> int:
        return self.core.n_heads

    def predict_dist(self, ids: Sequence[int], position: int) -> np.ndarray:
        """Distribution over the vocabulary for one position of ``ids``."""
        arr = np.asarray(list(ids), dtype=np.int64)
        if not (0 <= position < arr.size):
            raise InvalidArgumentError("position out of range")
        with T.no_grad():
            hidden = self.core.forward(arr[None, :])
            logits = T.matmul(hidden, self.out_proj)
            probs = T.softmax(logits, axis=-1)
        return probs.data[0, position]

    def loss(self, instances: list[tuple[np.ndarray, int, int]]) -> Tensor:
        """Mean NLL of (ids, position, target) masked-prediction instances."""
        seqs = [np.asarray(ids, np.int64) for ids, _, _ in instances]
        ids, mask = _pad_batch(seqs, self.vocab.pad_id)
        hidden = self.core.forward(ids, key_mask=mask)
        logits = T.matmul(hidden, self.out_proj)
        logp = T.log_softmax(logits, axis=-1)
        b, t = ids.shape
        flat = T.reshape(logp, (b * t, len(self.vocab)))
        rows = np.array([i * t + pos for i, (_, pos, _) in enumerate(instances)])
        picked = T.take_rows(flat, rows)
        targets = np.array([tgt for _, _, tgt in instances], dtype=np.int64)
        return T.mul(T.tmean(T.take_last_axis(picked, targets)), Tensor(-1.0))


def train_masked(
    instances: list[tuple[Sequence[int], int, int]],
    vocab: Vocab,
    epochs: int = 20,
    batch_size: int = 32,
    learning_rate: float = 1e-3,
    seed: int = 0,
    d: int = 64,
    n_layers: int = 2,
    n_heads: int = 2,
    l_max: int = 128,
) -> MaskedLm:
    """Fit a :class:`MaskedLm` on prebuilt (ids, position, target) instances."""
    if not instances:
        raise InvalidArgumentError("no training instances")
    model = MaskedLm(vocab, d=d, n_layers=n_layers, n_heads=n_heads, l_max=l_max, seed=seed)
    opt = Adam(model.params, learning_rate)
    prepared = [
        (np.asarray(ids, np.int64), pos, tgt) for ids, pos, tgt in instances
    ]
    order = np.arange(len(prepared))
    for epoch in range(epochs):
        rng = split_rng(seed, f"mask-epoch:{epoch}")
        rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            chunk = [prepared[i] for i in order[start : start + batch_size]]
            opt.zero_grad()
            loss = model.loss(chunk)
            loss.backward()
            opt.step()
    return model


def conditional_format(
    parts: tuple[list[str], ...] | list[list[str]], frame: str
) -> list[str]:
    """Concatenate token sequences with framing specials.

    ``t_sep_s_cls`` turns (first, second) into first ++ [SEP] ++ second ++ [CLS];
    ``prefix_sep`` turns (first,) into first ++ [SEP].  Inputs must not contain
    the framing specials so the format stays invertible.
    """
    parts = tuple(list(p) for p in parts)
    for p in parts:
        if SEP in p or CLS in p:
            raise InvalidArgumentError("parts must not contain framing specials")
    if frame == FRAME_T_SEP_S_CLS:
        if len(parts) != 2:
            raise InvalidArgumentError("t_sep_s_cls frame needs exactly two parts")
        return parts[0] + [SEP] + parts[1] + [CLS]
    if frame == FRAME_PREFIX_SEP:
        if len(parts) != 1:
            raise InvalidArgumentError("prefix_sep frame needs exactly one part")
        return parts[0] + [SEP]
    raise InvalidArgumentError(f"unknown frame {frame!r}")


def conditional_unformat(tokens: list[str], frame: str) -> tuple[list[str], ...]:
    """Invert :func:`conditional_format` for the given frame."""
    tokens = list(tokens)
    if frame == FRAME_T_SEP_S_CLS:
        if tokens.count(SEP) != 1 or not tokens or tokens[-1] != CLS:
            raise InvalidArgumentError("not a t_sep_s_cls framed sequence")
        i = tokens.index(SEP)
        return tokens[:i], tokens[i + 1 : -1]
    if frame == FRAME_PREFIX_SEP:
        if tokens.count(SEP) != 1 or tokens[-1] != SEP:
            raise InvalidArgumentError("not a prefix_sep framed sequence")
        return (tokens[:-1],)
    raise InvalidArgumentError(f"unknown frame {frame!r}")
