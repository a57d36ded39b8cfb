"""Tokenization and the three text representations used for retrieval.

A text is segmented into lowercased word tokens (alphabetic scripts) and
single characters (CJK scripts), looked up in an embedding table, and turned
into:

- a dense vector: element-wise max over the token vectors, L2-normalized;
- sparse weights: per-token ReLU of a learned-free linear projection,
  max-aggregated over repeated tokens;
- a multi-vector matrix: per-token projection through a square matrix,
  each row L2-normalized.

The two projections are drawn once from a seeded Gaussian and never trained.
Out-of-vocabulary tokens get deterministic hashed ids and unit Gaussian
embedding rows keyed by (table.oov_seed, token), so arbitrary text stays
embeddable.

All arrays are float32; downstream scoring upcasts to float64.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _binio
from .errors import EmptyText, ZeroVector

TABLE_MAGIC = b"AFSPEMB1"

OOV_ID_SPACE = 1 << 20

_CJK_RE = re.compile(r"[぀-ヿ㐀-䶿一-鿿豈-﫿]")
_WORD_RE = re.compile(r"\w+", re.UNICODE)

_NORM_EPS = 1e-12


def _stable_hash64(*parts: str) -> int:
    h = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def segment(text: str) -> list[str]:
    """Split text into lowercased word tokens; CJK characters come out one
    token each."""
    tokens: list[str] = []
    buf: list[str] = []

    def flush():
        if buf:
            tokens.extend(_WORD_RE.findall("".join(buf)))
            buf.clear()

    for ch in text.lower():
        if _CJK_RE.match(ch):
            flush()
            tokens.append(ch)
        else:
            buf.append(ch)
    flush()
    return tokens


@dataclass(frozen=True)
class EmbeddingTable:
    """Vocabulary plus a V x H float32 embedding matrix."""

    vocab: tuple[str, ...]
    matrix: np.ndarray
    oov_seed: int

    def __post_init__(self):
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("vocab entries must be unique")
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.vocab):
            raise ValueError("matrix must be 2-D with one row per vocab entry")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("embedding matrix has non-finite entries")
        object.__setattr__(self, "matrix", np.ascontiguousarray(self.matrix, dtype=np.float32))
        object.__setattr__(self, "_ids", {t: i for i, t in enumerate(self.vocab)})

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def token_id(self, token: str) -> int:
        """In-vocab index, or V + (hash(token) mod 2^20) for OOV tokens."""
        idx = self._ids.get(token)
        if idx is not None:
            return idx
        return len(self.vocab) + _stable_hash64(token) % OOV_ID_SPACE

    def vocab_index(self, token: str) -> int | None:
        """In-vocab index, or None for OOV tokens."""
        return self._ids.get(token)

    def oov_vector(self, token: str) -> np.ndarray:
        """Unit-norm Gaussian row keyed by (oov_seed, token)."""
        rng = np.random.default_rng(_stable_hash64(str(self.oov_seed), token))
        vec = rng.standard_normal(self.dim)
        return (vec / np.linalg.norm(vec)).astype(np.float32)

    def token_vector(self, token: str) -> np.ndarray:
        idx = self._ids.get(token)
        if idx is not None:
            return self.matrix[idx]
        return self.oov_vector(token)


@dataclass(frozen=True)
class TextEmbeddings:
    """Per-token ids and embedding rows for one text (l x H)."""

    tokens: tuple[int, ...]
    vectors: np.ndarray


@dataclass(frozen=True)
class ProjectionSet:
    """Seeded Gaussian projections: an H-vector and an H x H matrix.

    Entries are i.i.d. N(0, 1/H) so projected activations stay at input
    scale; reproducible from (dim, seed) alone.
    """

    w_sparse: np.ndarray
    w_multi: np.ndarray
    seed: int

    @property
    def dim(self) -> int:
        return self.w_sparse.shape[0]


@dataclass(frozen=True)
class DenseVec:
    values: np.ndarray


@dataclass(frozen=True)
class SparseWeights:
    """token id -> positive weight; ReLU-zeroed tokens are omitted."""

    weights: dict[int, float]


@dataclass(frozen=True)
class MultiVec:
    """l x H matrix with unit-norm rows."""

    rows: np.ndarray


def tokenize(table: EmbeddingTable, text: str) -> list[int]:
    """Token ids for a text; OOV ids land outside the vocab range."""
    tokens = segment(text)
    if not tokens:
        raise EmptyText(f"no tokens in {text!r}")
    return [table.token_id(t) for t in tokens]


def embed_tokens(table: EmbeddingTable, text: str) -> TextEmbeddings:
    """Look up (or hash-generate) one embedding row per token."""
    tokens = segment(text)
    if not tokens:
        raise EmptyText(f"no tokens in {text!r}")
    ids = tuple(table.token_id(t) for t in tokens)
    rows = np.stack([table.token_vector(t) for t in tokens])
    return TextEmbeddings(tokens=ids, vectors=rows)


def _unit(vec: np.ndarray, context: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec.astype(np.float64)))
    if norm < _NORM_EPS:
        raise ZeroVector(f"{context}: zero-norm vector cannot be normalized")
    return (vec.astype(np.float64) / norm).astype(np.float32)


def dense_embed(emb: TextEmbeddings) -> DenseVec:
    """Element-wise max over tokens, then L2 normalization."""
    pooled = emb.vectors.max(axis=0)
    return DenseVec(values=_unit(pooled, "dense pooling"))


def sparse_embed(emb: TextEmbeddings, proj: ProjectionSet) -> SparseWeights:
    """Per-token ReLU(w_sparse . row); repeated token ids keep the max."""
    raw = emb.vectors.astype(np.float64) @ proj.w_sparse.astype(np.float64)
    weights: dict[int, float] = {}
    for tid, w in zip(emb.tokens, raw):
        w = float(np.float32(w))
        if w <= 0.0:
            continue
        if w > weights.get(tid, 0.0):
            weights[tid] = w
    return SparseWeights(weights=weights)


def multi_embed(emb: TextEmbeddings, proj: ProjectionSet) -> MultiVec:
    """Project every token row through w_multi and normalize each row."""
    projected = emb.vectors.astype(np.float64) @ proj.w_multi.astype(np.float64)
    norms = np.linalg.norm(projected, axis=1)
    if np.any(norms < _NORM_EPS):
        raise ZeroVector("token projection: zero-norm row cannot be normalized")
    return MultiVec(rows=(projected / norms[:, None]).astype(np.float32))


def init_projections(dim: int, seed: int) -> ProjectionSet:
    """Draw the sparse/multi projections from N(0, 1/dim) with a fixed seed."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    std = 1.0 / np.sqrt(dim)
    w_sparse = (rng.standard_normal(dim) * std).astype(np.float32)
    w_multi = (rng.standard_normal((dim, dim)) * std).astype(np.float32)
    return ProjectionSet(w_sparse=w_sparse, w_multi=w_multi, seed=seed)


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    """Write the table in the binary format (magic ``AFSPEMB1``)."""
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        _binio.write_u32(fh, len(table.vocab))
        _binio.write_u32(fh, table.dim)
        _binio.write_u64(fh, table.oov_seed)
        for token in table.vocab:
            _binio.write_str(fh, token)
        _binio.write_f32_array(fh, table.matrix)


def load_table(path: str | Path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        _binio.check_magic(fh, TABLE_MAGIC)
        v = _binio.read_u32(fh, "vocab size")
        h = _binio.read_u32(fh, "embedding dim")
        oov_seed = _binio.read_u64(fh, "oov seed")
        vocab = tuple(_binio.read_str(fh, f"token {i}") for i in range(v))
        matrix = _binio.read_f32_array(fh, v * h, "embedding matrix").reshape(v, h)
    return EmbeddingTable(vocab=vocab, matrix=matrix, oov_seed=oov_seed)


def synthetic_table(
    vocab: list[str] | tuple[str, ...],
    dim: int,
    seed: int,
    oov_seed: int = 0,
) -> EmbeddingTable:
    """Seeded Gaussian table for tests and desk-scale runs."""
    rng = np.random.default_rng(seed)
    matrix = (rng.standard_normal((len(vocab), dim)) / np.sqrt(dim)).astype(np.float32)
    return EmbeddingTable(vocab=tuple(vocab), matrix=matrix, oov_seed=oov_seed)
