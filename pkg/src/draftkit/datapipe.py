"""Paraphrase-pair mining and filtering.

Candidate pairs come from back translation (through a pluggable translation
client), embedding retrieval, or existing datasets.  Pairs that are nearly
identical lexically (token Levenshtein), nearly identical under optimal
transport (word mover's distance), or semantically unrelated (mean-pooled
cosine) are filtered out before training.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import EmbeddingLookupError, InvalidArgumentError, TransportError

WMD_MAX_SUPPORT = 64


@dataclass
class SentencePair:
    s: list[str]
    t: list[str]
    source: str = "dataset"  # "back_translation" | "retrieval" | "dataset"
    lex_dist: int | None = None
    wmd: float | None = None
    sem_sim: float | None = None

    def as_dict(self) -> dict:
        return {"s": " ".join(self.s), "t": " ".join(self.t), "source": self.source}


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Minimal insert/delete/substitute count between token sequences."""
    a, b = list(a), list(b)
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (x != y),
            )
        prev = cur
    return prev[-1]


def _nbow(tokens: Sequence[str]) -> tuple[list[str], np.ndarray]:
    counts = Counter(tokens)
    words = sorted(counts)
    weights = np.array([counts[w] for w in words], dtype=float)
    return words, weights / weights.sum()


def _vectors(words: list[str], embeddings: dict[str, np.ndarray]) -> np.ndarray:
    rows = []
    for w in words:
        if w not in embeddings:
            raise EmbeddingLookupError(w)
        rows.append(np.asarray(embeddings[w], dtype=float))
    return np.stack(rows)


def wmd(a: Sequence[str], b: Sequence[str], embeddings: dict[str, np.ndarray]) -> float:
    """Exact word mover's distance between normalized bags of words.

    Ground cost is the Euclidean distance between embeddings; the transport
    problem is solved exactly for supports up to 64 distinct tokens per side.
    """
    a, b = list(a), list(b)
    if not a or not b:
        raise InvalidArgumentError("both sentences must be nonempty")
    wa, pa = _nbow(a)
    wb, pb = _nbow(b)
    if len(wa) > WMD_MAX_SUPPORT or len(wb) > WMD_MAX_SUPPORT:
        raise InvalidArgumentError(
            f"support larger than {WMD_MAX_SUPPORT} distinct tokens"
        )
    va = _vectors(wa, embeddings)
    vb = _vectors(wb, embeddings)
    if wa == wb and np.array_equal(pa, pb):
        return 0.0
    # Canonical argument order keeps the value exactly symmetric.
    if (wb, pb.tolist()) < (wa, pa.tolist()):
        wa, pa, va, wb, pb, vb = wb, pb, vb, wa, pa, va
    diff = va[:, None, :] - vb[None, :, :]
    cost = np.sqrt((diff * diff).sum(axis=2))
    n, m = cost.shape
    # Transportation LP: row sums = pa, column sums = pb.
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    res = linprog(
        cost.ravel(),
        A_eq=a_eq,
        b_eq=np.concatenate([pa, pb]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise InvalidArgumentError(f"transport solve failed: {res.message}")
    return max(float(res.fun), 0.0)


def word_centroid_distance(
    a: Sequence[str], b: Sequence[str], embeddings: dict[str, np.ndarray]
) -> float:
    """Distance between nbow-weighted embedding centroids; lower-bounds wmd."""
    wa, pa = _nbow(list(a))
    wb, pb = _nbow(list(b))
    ca = pa @ _vectors(wa, embeddings)
    cb = pb @ _vectors(wb, embeddings)
    return float(np.linalg.norm(ca - cb))


def mean_pooled(
    tokens: Sequence[str], embeddings: dict[str, np.ndarray]
) -> np.ndarray | None:
    """Mean of the known token embeddings; None when no token is known."""
    rows = [np.asarray(embeddings[t], float) for t in tokens if t in embeddings]
    if not rows:
        return None
    return np.mean(rows, axis=0)


def semantic_similarity(
    a: Sequence[str], b: Sequence[str], embeddings: dict[str, np.ndarray]
) -> float:
    """Cosine of mean-pooled sentence embeddings; -1 when either is unknown."""
    pa = mean_pooled(a, embeddings)
    pb = mean_pooled(b, embeddings)
    if pa is None or pb is None:
        return -1.0
    na, nb = np.linalg.norm(pa), np.linalg.norm(pb)
    if na == 0 or nb == 0:
        return -1.0
    return float(np.clip(pa @ pb / (na * nb), -1.0, 1.0))


def filter_pairs(
    pairs: Sequence[SentencePair],
    min_lex: int,
    min_wmd: float,
    min_sem: float,
    embeddings: dict[str, np.ndarray],
) -> tuple[list[SentencePair], dict]:
    """Keep pairs passing all three floors; report counts per rejection.

    A rejected pair is counted against the first floor it fails, in the
    order lexical, transport, semantic.  Input order is preserved.
    """
    kept: list[SentencePair] = []
    rejected = {"lex": 0, "wmd": 0, "sem": 0}
    for pair in pairs:
        pair.lex_dist = levenshtein(pair.s, pair.t)
        pair.wmd = wmd(pair.s, pair.t, embeddings)
        pair.sem_sim = semantic_similarity(pair.s, pair.t, embeddings)
        if pair.lex_dist < min_lex:
            rejected["lex"] += 1
        elif pair.wmd < min_wmd:
            rejected["wmd"] += 1
        elif pair.sem_sim < min_sem:
            rejected["sem"] += 1
        else:
            kept.append(pair)
    report = {"kept": len(kept), "rejected_by": rejected}
    return kept, report


def mine_retrieval(
    corpus: Sequence[Sequence[str]],
    query: Sequence[str],
    topn: int,
    embeddings: dict[str, np.ndarray],
) -> list[SentencePair]:
    """Nearest corpus sentences by mean-pooled cosine; the query is excluded."""
    query = list(query)
    scores: list[tuple[float, int]] = []
    for i, sent in enumerate(corpus):
        if list(sent) == query:
            continue
        sim = semantic_similarity(query, sent, embeddings)
        scores.append((sim, i))
    scores.sort(key=lambda e: (-e[0], e[1]))
    return [
        SentencePair(s=query, t=list(corpus[i]), source="retrieval", sem_sim=sim)
        for sim, i in scores[:topn]
    ]


# -- translation clients -------------------------------------------------------


class TranslationClient:
    """Wire contract: request {text, from, to} -> response {text}."""

    def translate(self, text: str, source: str, target: str) -> str:
        raise NotImplementedError


@dataclass
class MockTranslationClient(TranslationClient):
    """In-process client: word-level substitution table, optional failures."""

    table: dict[str, str] = field(default_factory=dict)
    reverse_table: dict[str, str] | None = None
    fail: bool = False

    def translate(self, text: str, source: str, target: str) -> str:
        if self.fail:
            raise TransportError("mock transport failure")
        mapping = self.table
        if self.reverse_table is not None and source != "src":
            mapping = self.reverse_table
        return " ".join(mapping.get(w, w) for w in text.split())


@dataclass
class HttpTranslationClient(TranslationClient):
    """POSTs the wire contract as JSON to any matching endpoint."""

    endpoint: str
    timeout: float = 10.0
    retries: int = 2

    def translate(self, text: str, source: str, target: str) -> str:
        payload = json.dumps({"text": text, "from": source, "to": target}).encode()
        last: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                req = urllib.request.Request(
                    self.endpoint,
                    data=payload,
                    headers={"Content-Type": "application/json"},
                )
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read())["text"]
            except (urllib.error.URLError, OSError, KeyError, ValueError) as exc:
                last = exc
        raise TransportError(f"translation failed after retries: {last}")


def backtranslate(
    client: TranslationClient, sentence: Sequence[str], pivot_lang: str
) -> SentencePair:
    """Round-trip a sentence through the pivot language; emit the (s, t) pair."""
    text = " ".join(sentence)
    pivot = client.translate(text, "src", pivot_lang)
    back = client.translate(pivot, pivot_lang, "src")
    return SentencePair(s=list(sentence), t=back.split(), source="back_translation")


def write_pairs(pairs: Sequence[SentencePair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps(p.as_dict()) + "\n")


def read_pairs(path: str | Path) -> list[SentencePair]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        out.append(
            SentencePair(
                s=obj["s"].split(), t=obj["t"].split(), source=obj.get("source", "dataset")
            )
        )
    return out


def load_tsv_pairs(path: str | Path, text_cols: tuple[int, int] = (0, 1)) -> list[SentencePair]:
    """Loader for tab-separated paraphrase datasets (two text columns)."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        cols = line.split("\t")
        i, j = text_cols
        if max(i, j) >= len(cols):
            raise InvalidArgumentError("tsv row lacks the configured text columns")
        out.append(SentencePair(s=cols[i].split(), t=cols[j].split(), source="dataset"))
    return out
