"""Closed-vocabulary word tokenizer with reserved special and class tokens."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import EmptyCorpus
from ..targets import CLASS_TOKENS

PAD, UNK, BOS = "<pad>", "<unk>", "<bos>"
SPECIAL_TOKEN = "<time-series-special-token>"
LEADING_RESERVED = (PAD, UNK, BOS, SPECIAL_TOKEN)
RESERVED = LEADING_RESERVED + CLASS_TOKENS

_TOKEN_RE = re.compile(
    "|".join(re.escape(t) for t in RESERVED)
    + r"|[A-Za-z0-9]+(?:[.'\-][A-Za-z0-9]+)*"
)
_RESERVED_SET = frozenset(RESERVED)


def split_tokens(text: str) -> list[str]:
    """Split text into reserved tokens and lowercased words; punctuation only separates."""
    return [t if t in _RESERVED_SET else t.lower() for t in _TOKEN_RE.findall(text)]


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})
        if len(self._index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        if self.tokens[-len(CLASS_TOKENS):] != CLASS_TOKENS:
            raise ValueError("class tokens must occupy the last five ids")

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._index.get(token, self._index[UNK])

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def pad_id(self) -> int:
        return self._index[PAD]

    @property
    def special_id(self) -> int:
        return self._index[SPECIAL_TOKEN]

    @property
    def class_ids(self) -> list[int]:
        return [self._index[t] for t in CLASS_TOKENS]


def build_vocab(corpus: Iterable[str]) -> Vocab:
    """Frequency-sorted word vocabulary (ties broken alphabetically) plus reserved ids."""
    counts: Counter[str] = Counter()
    n_docs = 0
    for text in corpus:
        n_docs += 1
        counts.update(t for t in split_tokens(text) if t not in _RESERVED_SET)
    if n_docs == 0:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    words = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(LEADING_RESERVED + tuple(words) + CLASS_TOKENS)


def tokenize(text: str, vocab: Vocab) -> list[int]:
    return [vocab.id(BOS)] + [vocab.id(t) for t in split_tokens(text)]


def detokenize(ids: Sequence[int], vocab: Vocab) -> list[str]:
    return [vocab.tokens[i] for i in ids]
