"""Token vocabulary with the special tokens the engine relies on.

Vocab files are UTF-8, one token per line, with a single header line
declaring the special tokens:

    #specials: [SEP] [CLS] [MASK] [blank] [ans] [null] [PAD]
    the
    cat
    ...

Specials are prepended in declared order; remaining lines follow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidArgumentError

SEP = "[SEP]"
CLS = "[CLS]"
MASK = "[MASK]"
BLANK = "[blank]"
ANS = "[ans]"
NULL = "[null]"
PAD = "[PAD]"
UNK = "[UNK]"

SPECIAL_TOKENS = (SEP, CLS, MASK, BLANK, ANS, NULL, PAD)

_HEADER_PREFIX = "#specials:"


def tokenize(text: str, mode: str = "whitespace") -> list[str]:
    """Split text into tokens; ``whitespace`` or ``char``."""
    if mode == "whitespace":
        return text.split()
    if mode == "char":
        return [c for c in text if not c.isspace()]
    raise InvalidArgumentError(f"unknown tokenizer mode {mode!r}")


def detokenize(tokens: list[str], mode: str = "whitespace") -> str:
    return (" " if mode == "whitespace" else "").join(tokens)


@dataclass
class Vocab:
    """Ordered token list plus an index and the special-token ids."""

    tokens: list[str]
    tokenizer: str = "whitespace"
    index: dict[str, int] = field(init=False, repr=False)
    specials: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise InvalidArgumentError("vocab tokens must be unique")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        missing = [s for s in SPECIAL_TOKENS if s not in self.index]
        if missing:
            raise InvalidArgumentError(f"vocab missing specials {missing}")
        self.specials = {s: self.index[s] for s in SPECIAL_TOKENS}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def sep_id(self) -> int:
        return self.specials[SEP]

    @property
    def cls_id(self) -> int:
        return self.specials[CLS]

    @property
    def mask_id(self) -> int:
        return self.specials[MASK]

    @property
    def blank_id(self) -> int:
        return self.specials[BLANK]

    @property
    def ans_id(self) -> int:
        return self.specials[ANS]

    @property
    def null_id(self) -> int:
        return self.specials[NULL]

    @property
    def pad_id(self) -> int:
        return self.specials[PAD]

    def encode(self, tokens: list[str]) -> list[int]:
        """Map tokens to ids; unknown tokens map to [UNK] when present."""
        unk = self.index.get(UNK)
        ids = []
        for t in tokens:
            i = self.index.get(t)
            if i is None:
                if unk is None:
                    raise InvalidArgumentError(f"token {t!r} not in vocab")
                i = unk
            ids.append(i)
        return ids

    def decode(self, ids: list[int]) -> list[str]:
        for i in ids:
            if not (0 <= i < len(self.tokens)):
                raise InvalidArgumentError(f"token id {i} out of range")
        return [self.tokens[i] for i in ids]

    def encode_text(self, text: str) -> list[int]:
        return self.encode(tokenize(text, self.tokenizer))

    def decode_text(self, ids: list[int]) -> str:
        return detokenize(self.decode(ids), self.tokenizer)

    @classmethod
    def build(
        cls,
        corpus: list[list[str]],
        tokenizer: str = "whitespace",
        include_unk: bool = True,
    ) -> "Vocab":
        """Vocab over all corpus tokens, specials first, then sorted tokens."""
        seen = sorted({t for sent in corpus for t in sent} - set(SPECIAL_TOKENS))
        extra = [UNK] if include_unk and UNK not in seen else []
        return cls(list(SPECIAL_TOKENS) + extra + seen, tokenizer=tokenizer)

    def save(self, path: str | Path) -> None:
        lines = [f"{_HEADER_PREFIX} {' '.join(SPECIAL_TOKENS)}"]
        lines += [t for t in self.tokens if t not in self.specials]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, tokenizer: str = "whitespace") -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith(_HEADER_PREFIX):
            raise InvalidArgumentError(
                f"vocab file must start with {_HEADER_PREFIX!r}"
            )
        declared = lines[0][len(_HEADER_PREFIX) :].split()
        if sorted(declared) != sorted(SPECIAL_TOKENS):
            raise InvalidArgumentError("vocab header must declare all specials")
        rest = [ln for ln in lines[1:] if ln]
        return cls(declared + rest, tokenizer=tokenizer)
