"""JSON-over-HTTP suggestion service.

One POST /v1/suggest endpoint serves every capability through a ``kind``
discriminator; GET /v1/health and GET /v1/models report status.  Models are
loaded once at startup and never mutated, so concurrent requests are safe.
Sampling seeds derive from (request payload, model version) unless the
request pins one, making reads reproducible.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from . import tensor as T
from .corrector import (
    CrfModel,
    NullDetectorModel,
    apply_edits,
    correct_substitutions,
    null_detect,
)
from .decode import DecoderConfig, decode
from .errors import DraftkitError, InvalidArgumentError
from .infill import Bm25Index, bm25_search, infill_generate
from .lm import FRAME_PREFIX_SEP, LmModel, conditional_format
from .polish import PolishConfig, SimilarityGraph, polish
from .rng import derive_seed
from .store import Config, load

KINDS = ("complete", "polish", "correct", "infill", "expand", "retrieve")


class DecoderOverrides(BaseModel):
    model_config = {"extra": "forbid"}
    strategy: Literal["greedy", "beam", "nucleus", "contrastive"] | None = None
    k: int | None = None
    alpha: float | None = None
    beam_width: int | None = None
    nucleus_p: float | None = None
    max_new_tokens: int | None = None
    seed: int | None = None


class SuggestRequest(BaseModel):
    model_config = {"extra": "forbid"}
    kind: Literal["complete", "polish", "correct", "infill", "expand", "retrieve"]
    text: str = ""
    span: tuple[int, int] | None = None
    keywords: list[str] | None = None
    decoder: DecoderOverrides | None = None
    n: int = Field(default=3, ge=1, le=32)

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.kind == "polish" and self.span is None:
            raise ValueError("span is required when kind is polish")
        if self.kind != "polish" and self.span is not None:
            raise ValueError("span is only valid when kind is polish")
        if self.kind == "infill" and not self.keywords:
            raise ValueError("keywords are required when kind is infill")
        if self.kind not in ("infill", "retrieve") and self.keywords:
            raise ValueError("keywords are only valid for infill or retrieve")
        return self


class CandidateOut(BaseModel):
    text: str
    score: float
    provenance: Literal["generated", "retrieved"]
    edits: list[dict] | None = None


class SuggestResponse(BaseModel):
    candidates: list[CandidateOut]
    model_version: str
    latency_ms: float


@dataclass
class ModelBundle:
    """Immutable snapshot of every asset the endpoints may need."""

    lm: LmModel | None = None
    crf: CrfModel | None = None
    null: NullDetectorModel | None = None
    graph: SimilarityGraph | None = None
    corpus: list[list[str]] = field(default_factory=list)
    bm25: Bm25Index | None = None
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    polish_cfg: PolishConfig = field(default_factory=PolishConfig)
    n_default: int = 3
    version: str = "unversioned"

    @classmethod
    def from_config(cls, cfg: Config) -> "ModelBundle":
        svc = cfg.service
        bundle = cls(
            decoder=cfg.decoder,
            polish_cfg=cfg.polish,
            n_default=svc.n_default,
        )
        hasher = hashlib.blake2b(digest_size=6)
        for label, path in (
            ("lm", svc.lm_model),
            ("crf", svc.crf_model),
            ("null", svc.null_model),
        ):
            if path is None:
                continue
            if not Path(path).exists():
                raise InvalidArgumentError(f"model archive missing: {path}")
            setattr(bundle, label, load(path))
            hasher.update(Path(path).read_bytes())
        if svc.graph:
            bundle.graph = SimilarityGraph.load(svc.graph)
            hasher.update(Path(svc.graph).read_bytes())
        if svc.corpus:
            text = Path(svc.corpus).read_text(encoding="utf-8")
            bundle.corpus = [line.split() for line in text.splitlines() if line.strip()]
            bundle.bm25 = Bm25Index.build(bundle.corpus)
            hasher.update(text.encode("utf-8"))
        bundle.version = hasher.hexdigest()
        return bundle


def _request_seed(req: SuggestRequest, version: str) -> int:
    if req.decoder and req.decoder.seed is not None:
        return req.decoder.seed
    payload = req.model_dump(exclude_none=True)
    payload.pop("decoder", None)
    canonical = json.dumps(payload, sort_keys=True) + version
    return int.from_bytes(
        hashlib.blake2b(canonical.encode(), digest_size=8).digest(), "little"
    )


def _decoder_for(bundle: ModelBundle, req: SuggestRequest) -> DecoderConfig:
    base = bundle.decoder
    over = req.decoder or DecoderOverrides()
    return DecoderConfig(
        strategy=over.strategy or base.strategy,
        k=over.k or base.k,
        alpha=base.alpha if over.alpha is None else over.alpha,
        beam_width=over.beam_width or base.beam_width,
        nucleus_p=over.nucleus_p or base.nucleus_p,
        max_new_tokens=over.max_new_tokens or base.max_new_tokens,
        seed=_request_seed(req, bundle.version),
    )


def _mean_logprob(model: LmModel, prefix: list[int], continuation: list[int]) -> float:
    if not continuation:
        return 0.0
    full = prefix + continuation
    with T.no_grad():
        logp = T.log_softmax(model.logits(full), axis=-1).data
    total = sum(logp[t - 1, full[t]] for t in range(len(prefix), len(full)))
    return float(total / len(continuation))


def _strip_end(model: LmModel, ids: list[int]) -> list[int]:
    """Plain-text continuation: cut at the first structural special."""
    specials = set(model.vocab.specials.values())
    for i, tok in enumerate(ids):
        if tok in specials:
            return ids[:i]
    return ids


def _complete(bundle: ModelBundle, req: SuggestRequest, cfg: DecoderConfig):
    model = _require(bundle.lm, "lm")
    prefix = model.vocab.encode_text(req.text)
    if not prefix:
        raise InvalidArgumentError("text must contain at least one token")
    n = req.n
    seen: set[tuple[int, ...]] = set()
    out = []
    for i in range(n):
        sub = DecoderConfig(
            strategy=cfg.strategy,
            k=cfg.k,
            alpha=cfg.alpha,
            beam_width=cfg.beam_width,
            nucleus_p=cfg.nucleus_p,
            max_new_tokens=cfg.max_new_tokens,
            seed=derive_seed(cfg.seed, f"candidate:{i}"),
        )
        ids, _ = decode(model, prefix, sub)
        ids = _strip_end(model, ids)
        key = tuple(ids)
        if not ids or key in seen:
            continue
        seen.add(key)
        out.append(
            CandidateOut(
                text=model.vocab.decode_text(ids),
                score=_mean_logprob(model, prefix, ids),
                provenance="generated",
            )
        )
    return out


def _expand(bundle: ModelBundle, req: SuggestRequest, cfg: DecoderConfig):
    model = _require(bundle.lm, "lm")
    skeleton = req.text.split()
    framed = conditional_format((skeleton,), FRAME_PREFIX_SEP)
    prefix = model.vocab.encode(framed)
    out = []
    seen: set[tuple[int, ...]] = set()
    for i in range(req.n):
        sub = DecoderConfig(
            strategy=cfg.strategy,
            k=cfg.k,
            alpha=cfg.alpha,
            beam_width=cfg.beam_width,
            nucleus_p=cfg.nucleus_p,
            max_new_tokens=cfg.max_new_tokens,
            seed=derive_seed(cfg.seed, f"candidate:{i}"),
        )
        ids, _ = decode(model, prefix, sub)
        ids = _strip_end(model, ids)
        key = tuple(ids)
        if not ids or key in seen:
            continue
        seen.add(key)
        out.append(
            CandidateOut(
                text=model.vocab.decode_text(ids),
                score=_mean_logprob(model, prefix, ids),
                provenance="generated",
            )
        )
    return out


def _polish(bundle: ModelBundle, req: SuggestRequest):
    graph = _require(bundle.graph, "graph")
    tokens = req.text.split()
    cfg = PolishConfig(
        lam=bundle.polish_cfg.lam,
        window=bundle.polish_cfg.window,
        top_m=req.n,
    )
    ranked = polish(tokens, req.span, graph, cfg)
    return [
        CandidateOut(text=c.phrase, score=c.score, provenance="generated")
        for c in ranked
    ]


def _correct(bundle: ModelBundle, req: SuggestRequest):
    tokens = req.text.split()
    if not tokens:
        raise InvalidArgumentError("text must contain at least one token")
    edits = []
    if bundle.crf is not None:
        _, subs = correct_substitutions(bundle.crf, tokens)
        edits.extend(subs)
    if bundle.null is not None:
        edits.extend(null_detect(bundle.null, tokens))
    corrected = apply_edits(tokens, edits)
    score = 1.0 if edits else 0.0
    return [
        CandidateOut(
            text=" ".join(corrected),
            score=score,
            provenance="generated",
            edits=[e.as_dict() for e in edits],
        )
    ]


def _infill(bundle: ModelBundle, req: SuggestRequest, cfg: DecoderConfig):
    model = _require(bundle.lm, "lm")
    keywords = [kw.split() for kw in req.keywords]
    sentences, _ = infill_generate(model, keywords, cfg, n_candidates=req.n)
    out = []
    for sent in sentences:
        ids = model.vocab.encode(sent)
        out.append(
            CandidateOut(
                text=" ".join(sent),
                score=_mean_logprob(model, ids[:1], ids[1:]),
                provenance="generated",
            )
        )
    return out


def _retrieve(bundle: ModelBundle, req: SuggestRequest):
    index = _require(bundle.bm25, "corpus")
    query = req.text.split() if req.text else [t for k in (req.keywords or []) for t in k.split()]
    if not query:
        raise InvalidArgumentError("retrieve needs text or keywords")
    hits = bm25_search(index, query, req.n)
    return [
        CandidateOut(
            text=" ".join(bundle.corpus[doc]), score=score, provenance="retrieved"
        )
        for doc, score in hits
        if score > 0.0
    ]


def _require(value, name: str):
    if value is None:
        raise InvalidArgumentError(f"no {name} asset is configured")
    return value


def build_app(bundle: ModelBundle) -> FastAPI:
    app = FastAPI(title="draftkit", version=bundle.version)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        errors = [
            {"path": ".".join(str(p) for p in e["loc"]), "message": e["msg"]}
            for e in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": errors})

    @app.exception_handler(DraftkitError)
    async def _domain_handler(request: Request, exc: DraftkitError):
        return JSONResponse(status_code=400, content={"errors": [{"message": str(exc)}]})

    @app.get("/v1/health")
    def health():
        models = []
        for name in ("lm", "crf", "null", "graph", "bm25"):
            if getattr(bundle, name) is not None:
                models.append(name)
        return {"status": "ok", "models": models}

    @app.get("/v1/models")
    def models():
        out: dict[str, Any] = {"version": bundle.version, "models": {}}
        for name in ("lm", "crf"):
            model = getattr(bundle, name)
            if model is not None:
                out["models"][name] = {
                    "vocab_size": len(model.vocab),
                    "d": model.d,
                    "l_max": model.l_max,
                }
        if bundle.null is not None:
            out["models"]["null"] = {"vocab_size": len(bundle.null.vocab)}
        if bundle.bm25 is not None:
            out["models"]["bm25"] = {"docs": len(bundle.corpus)}
        if bundle.graph is not None:
            out["models"]["graph"] = {"nodes": len(bundle.graph.nodes)}
        return out

    @app.post("/v1/suggest", response_model=SuggestResponse)
    def suggest(req: SuggestRequest) -> SuggestResponse:
        started = time.perf_counter()
        cfg = _decoder_for(bundle, req)
        if req.kind == "complete":
            candidates = _complete(bundle, req, cfg)
        elif req.kind == "expand":
            candidates = _expand(bundle, req, cfg)
        elif req.kind == "polish":
            candidates = _polish(bundle, req)
        elif req.kind == "correct":
            candidates = _correct(bundle, req)
        elif req.kind == "infill":
            candidates = _infill(bundle, req, cfg)
        else:
            candidates = _retrieve(bundle, req)
        candidates.sort(key=lambda c: (-c.score, c.text))
        candidates = candidates[: req.n]
        return SuggestResponse(
            candidates=candidates,
            model_version=bundle.version,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )

    return app


def serve(config: Config) -> None:
    """Load every configured asset and block serving HTTP."""
    import uvicorn

    bundle = ModelBundle.from_config(config)
    app = build_app(bundle)
    uvicorn.run(app, host=config.service.host, port=config.service.port)
