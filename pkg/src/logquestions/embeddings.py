"""Pretrained word vectors and the shared open vocabulary."""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyFile, MalformedLine

logger = logging.getLogger(__name__)

PAD, UNK, SOS, EOS = "<pad>", "<unk>", "<sos>", "<eos>"
SPECIALS = (PAD, UNK, SOS, EOS)
DEFAULT_LIMIT = 20000


@dataclass(frozen=True)
class EmbeddingTable:
    """Ordered vocabulary (ids are list positions) with one vector per token.

    The four special tokens always occupy ids 0-3.
    """

    tokens: tuple[str, ...]
    vectors: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if self.vectors.shape[0] != len(self.tokens):
            raise ValueError("one vector per token required")
        object.__setattr__(self, "_index", index)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def lookup(self, token: str) -> int:
        """Id of ``token``; unknown tokens map to ``<unk>``."""
        return self._index.get(token, self._index[UNK])

    def token_at(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.lookup(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def digest(self) -> str:
        """SHA-256 over the token list; identifies the vocabulary in checkpoints."""
        return vocabulary_digest(self.tokens)


def vocabulary_digest(tokens: Sequence[str]) -> str:
    h = hashlib.sha256()
    for tok in tokens:
        h.update(tok.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def from_vectors(words: Sequence[str], vectors: np.ndarray) -> EmbeddingTable:
    """Prepend the specials to ``words``/``vectors``.

    Specials are zero vectors except ``<unk>``, which is the mean of the
    supplied vectors.
    """
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] != len(words):
        raise ValueError("vectors must be a (len(words), D) matrix")
    specials = np.zeros((len(SPECIALS), vectors.shape[1]), dtype=np.float32)
    if len(words):
        specials[SPECIALS.index(UNK)] = vectors.mean(axis=0)
    return EmbeddingTable(
        tokens=SPECIALS + tuple(words),
        vectors=np.concatenate([specials, vectors]),
    )


def _looks_like_header(fields: list[str]) -> bool:
    return len(fields) == 2 and all(f.isdigit() for f in fields)


def load_embeddings(path, limit: int = DEFAULT_LIMIT) -> EmbeddingTable:
    """Read the first ``limit`` vectors of a whitespace-separated text file.

    File order defines "first". A word2vec-style ``count dim`` header line is
    skipped. Tokens clashing with a special or an earlier token are dropped.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    words: list[str] = []
    rows: list[list[float]] = []
    seen = set(SPECIALS)
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if len(words) >= limit:
                break
            fields = line.rstrip("\n").rstrip(" ").split(" ")
            if not line.strip():
                continue
            if line_no == 1 and _looks_like_header(fields):
                continue
            token, values = fields[0], fields[1:]
            if dim is None:
                if not values:
                    raise MalformedLine(line_no, "no vector components")
                dim = len(values)
            if len(values) != dim:
                raise MalformedLine(line_no, f"expected {dim} components, got {len(values)}")
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise MalformedLine(line_no, f"non-numeric component ({exc})") from None
            if not all(math.isfinite(v) for v in vec):
                raise MalformedLine(line_no, "non-finite component")
            if token in seen:
                logger.warning("skipping duplicate token %r at line %d", token, line_no)
                continue
            seen.add(token)
            words.append(token)
            rows.append(vec)
    if dim is None:
        raise EmptyFile(f"{path}: no vectors")
    return from_vectors(words, np.array(rows, dtype=np.float32).reshape(len(rows), dim))


def save_embeddings(path, words: Sequence[str], vectors: np.ndarray) -> None:
    """Write vectors in the text format read by :func:`load_embeddings`."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word, vec in zip(words, np.asarray(vectors)):
            fh.write(word + " " + " ".join(f"{float(v):.6f}" for v in vec) + "\n")


def random_table(words: Sequence[str], dim: int, seed: int, scale: float | None = None) -> EmbeddingTable:
    """Table with i.i.d. Gaussian vectors for ``words``.

    The default std 1/sqrt(dim) gives unit expected norm, so self dot products
    stay near 1 while cross terms shrink as dim grows.
    """
    rng = np.random.default_rng(seed)
    std = dim ** -0.5 if scale is None else scale
    return from_vectors(list(words), rng.normal(0.0, std, size=(len(words), dim)))


def one_hot_table(words: Sequence[str], scale: float = 1.0) -> EmbeddingTable:
    """Per-type orthogonal vectors: dot(v, w) = scale**2 * [v == w]."""
    return from_vectors(list(words), scale * np.eye(len(words)))
