"""Versioned binary archives and strict configuration loading.

Archive layout (all integers little-endian):

    magic "EFD1" | u32 format_version | u16+utf8 model_kind
    u32+utf8 meta JSON (vocab, architecture, thresholds)
    u32 tensor_count
    per tensor: u16+utf8 name | u8 dtype (0 = f32) | u8 ndim | u32 dims... |
                float32 payload
    8-byte checksum (blake2b) over every preceding byte

Payloads are float32 on disk, float64 in memory; round-trips are exact at
stored precision.  Any mismatch in magic, sizes, or checksum rejects the
whole file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .corrector import CrfConfig, CrfModel, NullDetectorModel
from .decode import DecoderConfig
from .errors import ArchiveError, ConfigError, InvalidArgumentError, NumericError
from .lm import LmModel, MaskedLm, TrainConfig
from .polish import PolishConfig
from .tensor import Tensor
from .vocab import Vocab

MAGIC = b"EFD1"
FORMAT_VERSION = 1
_DTYPE_F32 = 0


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ArchiveError("archive truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self, width: str = "H") -> str:
        n = self.u16() if width == "H" else self.u32()
        return self.take(n).decode("utf-8")


def _tensor_blocks(params: dict[str, Tensor]) -> bytes:
    out = [struct.pack("<I", len(params))]
    for name, t in params.items():
        arr = np.ascontiguousarray(t.data, dtype="<f4")
        out.append(_pack_str(name))
        out.append(struct.pack("<BB", _DTYPE_F32, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def _encode(kind: str, meta: dict, params: dict[str, Tensor]) -> bytes:
    for name, t in params.items():
        if not np.all(np.isfinite(t.data)):
            raise NumericError(f"tensor {name!r} holds non-finite values")
    meta_raw = json.dumps(meta).encode("utf-8")
    body = (
        MAGIC
        + struct.pack("<I", FORMAT_VERSION)
        + _pack_str(kind)
        + struct.pack("<I", len(meta_raw))
        + meta_raw
        + _tensor_blocks(params)
    )
    return body + _checksum(body)


def _model_meta(model) -> dict:
    return {
        "vocab": {"tokens": model.vocab.tokens, "tokenizer": model.vocab.tokenizer},
        "d": model.d,
        "n_layers": model.n_layers,
        "n_heads": model.n_heads,
        "l_max": model.l_max,
    }


def save(obj, path: str | Path) -> None:
    """Persist a model, detector, or embedding table; see the module header."""
    if isinstance(obj, LmModel):
        data = _encode("lm", _model_meta(obj), obj.params)
    elif isinstance(obj, CrfModel):
        meta = _model_meta(obj)
        meta["d_m"] = obj.d_m
        data = _encode("crf", meta, obj.params)
    elif isinstance(obj, NullDetectorModel):
        meta = _model_meta(obj.masked)
        meta["tau_ins"] = obj.tau_ins
        meta["tau_del"] = obj.tau_del
        meta["window"] = obj.window
        data = _encode("null_detector", meta, obj.masked.params)
    elif isinstance(obj, MaskedLm):
        data = _encode("masked_lm", _model_meta(obj), obj.params)
    elif isinstance(obj, dict) and all(isinstance(v, np.ndarray) for v in obj.values()):
        params = {k: Tensor(v) for k, v in obj.items()}
        data = _encode("embeddings", {}, params)
    else:
        raise InvalidArgumentError(f"cannot archive object of type {type(obj)!r}")
    Path(path).write_bytes(data)


def _read_tensors(r: _Reader) -> dict[str, np.ndarray]:
    count = r.u32()
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.string()
        dtype = r.u8()
        if dtype != _DTYPE_F32:
            raise ArchiveError(f"unknown dtype tag {dtype}")
        ndim = r.u8()
        shape = tuple(r.u32() for _ in range(ndim))
        n_bytes = int(np.prod(shape, dtype=np.int64)) * 4 if ndim else 4
        arr = np.frombuffer(r.take(n_bytes), dtype="<f4").reshape(shape)
        if name in out:
            raise ArchiveError(f"duplicate tensor name {name!r}")
        out[name] = arr.astype(np.float64)
    return out


def _restore_params(model_params: dict[str, Tensor], loaded: dict[str, np.ndarray]):
    if set(model_params) != set(loaded):
        raise ArchiveError("tensor names do not match the declared architecture")
    for name, t in model_params.items():
        if loaded[name].shape != t.data.shape:
            raise ArchiveError(f"tensor {name!r} has unexpected shape")
        t.data = loaded[name]


def load(path: str | Path):
    """Load whatever :func:`save` wrote; corrupted archives never half-load."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 12:
        raise ArchiveError("archive truncated")
    if data[:4] != MAGIC:
        raise ArchiveError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    body, digest = data[:-8], data[-8:]
    if _checksum(body) != digest:
        raise ArchiveError("checksum mismatch")
    r = _Reader(body)
    r.take(4)
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ArchiveError(f"unsupported format version {version}")
    kind = r.string()
    meta = json.loads(r.string(width="I"))
    tensors = _read_tensors(r)
    if r.pos != len(body):
        raise ArchiveError("trailing bytes after the last tensor")

    if kind == "embeddings":
        return tensors
    vocab = Vocab(meta["vocab"]["tokens"], tokenizer=meta["vocab"]["tokenizer"])
    arch = dict(
        d=meta["d"],
        n_layers=meta["n_layers"],
        n_heads=meta["n_heads"],
        l_max=meta["l_max"],
    )
    if kind == "lm":
        model = LmModel(vocab, **arch)
        _restore_params(model.params, tensors)
        return model
    if kind == "crf":
        model = CrfModel(vocab, d_m=meta["d_m"], **arch)
        _restore_params(model.params, tensors)
        return model
    if kind in ("null_detector", "masked_lm"):
        masked = MaskedLm(vocab, **arch)
        _restore_params(masked.params, tensors)
        if kind == "masked_lm":
            return masked
        return NullDetectorModel(
            masked,
            tau_ins=meta["tau_ins"],
            tau_del=meta["tau_del"],
            window=meta["window"],
        )
    raise ArchiveError(f"unknown model kind {kind!r}")


# -- configuration --------------------------------------------------------------


@dataclasses.dataclass
class FilterConfig:
    min_lex: int = 2
    min_wmd: float = 0.05
    min_sem: float = 0.6


@dataclasses.dataclass
class NullTaskConfig:
    insert_rate: float = 0.3
    mask_rate: float = 0.7
    tau_ins: float = 0.5
    tau_del: float = 0.5

    def __post_init__(self):
        if not (0 < self.insert_rate < 1) or not (0 < self.mask_rate < 1):
            raise InvalidArgumentError("insert_rate and mask_rate must lie in (0, 1)")
        if not (0 <= self.tau_ins <= 1) or not (0 <= self.tau_del <= 1):
            raise InvalidArgumentError("thresholds must lie in [0, 1]")


@dataclasses.dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    n_default: int = 3
    lm_model: str | None = None
    crf_model: str | None = None
    null_model: str | None = None
    graph: str | None = None
    corpus: str | None = None

    def __post_init__(self):
        if not (0 < self.port < 65536):
            raise InvalidArgumentError("port must lie in (0, 65536)")
        if self.n_default < 1:
            raise InvalidArgumentError("n_default must be >= 1")


@dataclasses.dataclass
class Config:
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    decoder: DecoderConfig = dataclasses.field(default_factory=DecoderConfig)
    crf: CrfConfig = dataclasses.field(default_factory=CrfConfig)
    polish: PolishConfig = dataclasses.field(default_factory=PolishConfig)
    filters: FilterConfig = dataclasses.field(default_factory=FilterConfig)
    null: NullTaskConfig = dataclasses.field(default_factory=NullTaskConfig)
    service: ServiceConfig = dataclasses.field(default_factory=ServiceConfig)


_SECTIONS = {
    "train": TrainConfig,
    "decoder": DecoderConfig,
    "crf": CrfConfig,
    "polish": PolishConfig,
    "filters": FilterConfig,
    "null": NullTaskConfig,
    "service": ServiceConfig,
}


def load_config(path: str | Path) -> Config:
    """Parse a JSON config; unknown keys and range violations are fatal."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section {sorted(unknown)[0]!r}")
    built = {}
    for section, cls in _SECTIONS.items():
        payload = raw.get(section, {})
        if not isinstance(payload, dict):
            raise ConfigError(f"section {section!r} must be an object")
        field_names = {f.name for f in dataclasses.fields(cls)}
        bad = set(payload) - field_names
        if bad:
            raise ConfigError(f"unknown key {section}.{sorted(bad)[0]}")
        try:
            built[section] = cls(**payload)
        except InvalidArgumentError as exc:
            raise ConfigError(f"{section}: {exc}")
        except TypeError as exc:
            raise ConfigError(f"{section}: {exc}")
    return Config(**built)
