"""Demonstration retrieval: precomputed index, relevance scores, top-k.

Every corpus pair's source side is embedded once into the three
representations and stored in a :class:`RetrievalIndex`. A query is scored
against every entry (exhaustive scan; corpora here are small enough that
approximate indexing is not worth it) with

- dense score: inner product of the two unit dense vectors,
- sparse score: sum over co-occurring token ids of the two token weights,
- multi score: mean over query tokens of the best match against the
  demonstration's token vectors (late interaction),

fused as ``alpha1 * dense + alpha2 * sparse + alpha3 * multi``. The sparse
score is unbounded while the other two live in [-1, 1]; scores are fused raw
by default, with an opt-in min-max normalization over the candidate pool for
callers that want comparable scales.

Scoring is done in float64 on the stored float32 representations, so results
are identical whether the index was just built or reloaded from disk.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _binio
from .corpus import Corpus, DemoPair
from .embedding import (
    DenseVec,
    EmbeddingTable,
    MultiVec,
    ProjectionSet,
    SparseWeights,
    dense_embed,
    embed_tokens,
    multi_embed,
    sparse_embed,
)
from .errors import (
    AfspError,
    DimensionMismatch,
    EmptyQuery,
    EmptyText,
    FingerprintMismatch,
    VersionMismatch,
)

INDEX_MAGIC = b"AFSPIDX1"


@dataclass(frozen=True)
class Weights:
    """Fusion weights for the three relevance scores."""

    alpha1: float = 0.4
    alpha2: float = 0.4
    alpha3: float = 0.2

    def __post_init__(self):
        alphas = (self.alpha1, self.alpha2, self.alpha3)
        if any(a < 0 or not math.isfinite(a) for a in alphas):
            raise ValueError(f"weights must be finite and non-negative, got {alphas}")
        if not any(a > 0 for a in alphas):
            raise ValueError("at least one weight must be positive")


@dataclass(frozen=True)
class IndexEntry:
    pair: DemoPair
    dense: DenseVec
    sparse: SparseWeights
    multi: MultiVec


@dataclass(frozen=True)
class ScoredDemo:
    pair: DemoPair
    s_dense: float
    s_sparse: float
    s_multi: float
    s_rank: float


def score_dense(q: DenseVec, p: DenseVec) -> float:
    """Inner product of two unit vectors; symmetric, in [-1, 1]."""
    if q.values.shape != p.values.shape:
        raise DimensionMismatch(
            f"dense vectors have dims {q.values.shape[0]} and {p.values.shape[0]}"
        )
    return float(q.values.astype(np.float64) @ p.values.astype(np.float64))


def score_sparse(q: SparseWeights, p: SparseWeights) -> float:
    """Sum of weight products over token ids present on both sides.

    Terms are summed in token-id order so the result is bitwise symmetric.
    """
    if len(p.weights) < len(q.weights):
        q, p = p, q
    shared = sorted(t for t in q.weights if t in p.weights)
    return float(sum(q.weights[t] * p.weights[t] for t in shared))


def score_multi(q: MultiVec, p: MultiVec) -> float:
    """Late interaction: mean over query rows of the max inner product
    against the demonstration rows. Not symmetric in general."""
    if q.rows.shape[1] != p.rows.shape[1]:
        raise DimensionMismatch(
            f"multi-vector dims differ: {q.rows.shape[1]} vs {p.rows.shape[1]}"
        )
    sims = q.rows.astype(np.float64) @ p.rows.astype(np.float64).T
    return float(sims.max(axis=1).mean())


def score_hybrid(s_dense: float, s_sparse: float, s_multi: float, w: Weights) -> float:
    return w.alpha1 * s_dense + w.alpha2 * s_sparse + w.alpha3 * s_multi


def table_fingerprint(table: EmbeddingTable, proj: ProjectionSet) -> bytes:
    """32-byte digest binding an index to its table and projections."""
    h = hashlib.sha256()
    h.update(len(table.vocab).to_bytes(4, "little"))
    h.update(table.dim.to_bytes(4, "little"))
    h.update((table.oov_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    h.update("\x1f".join(table.vocab).encode("utf-8"))
    h.update(np.ascontiguousarray(table.matrix, dtype="<f4").tobytes())
    h.update((proj.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    h.update(np.ascontiguousarray(proj.w_sparse, dtype="<f4").tobytes())
    h.update(np.ascontiguousarray(proj.w_multi, dtype="<f4").tobytes())
    return h.digest()


class RetrievalIndex:
    """Precomputed source-side representations for every corpus pair."""

    def __init__(self, entries: list[IndexEntry], fingerprint: bytes):
        if not entries:
            raise ValueError("index needs at least one entry")
        self.entries: tuple[IndexEntry, ...] = tuple(entries)
        self.fingerprint = fingerprint
        self._scan_cache = None

    def __len__(self) -> int:
        return len(self.entries)

    def _scan_arrays(self):
        """Lazily stacked float64 views used by the batched scan."""
        if self._scan_cache is None:
            dense_mat = np.stack(
                [e.dense.values for e in self.entries]
            ).astype(np.float64)
            multi_rows = np.concatenate(
                [e.multi.rows for e in self.entries]
            ).astype(np.float64)
            offsets = np.zeros(len(self.entries), dtype=np.intp)
            total = 0
            for i, e in enumerate(self.entries):
                offsets[i] = total
                total += e.multi.rows.shape[0]
            inverted: dict[int, list[tuple[int, float]]] = {}
            for i, e in enumerate(self.entries):
                for tid, w in e.sparse.weights.items():
                    inverted.setdefault(tid, []).append((i, w))
            sparse_inv = {
                tid: (
                    np.array([i for i, _ in hits], dtype=np.intp),
                    np.array([w for _, w in hits], dtype=np.float64),
                )
                for tid, hits in inverted.items()
            }
            self._scan_cache = (dense_mat, multi_rows, offsets, sparse_inv)
        return self._scan_cache


def build_index(
    corpus: Corpus, table: EmbeddingTable, proj: ProjectionSet
) -> RetrievalIndex:
    """Embed every pair's source text; entries keep corpus order."""
    entries = []
    for pair in corpus:
        try:
            emb = embed_tokens(table, pair.src_text)
            entries.append(
                IndexEntry(
                    pair=pair,
                    dense=dense_embed(emb),
                    sparse=sparse_embed(emb, proj),
                    multi=multi_embed(emb, proj),
                )
            )
        except AfspError as exc:
            raise exc.__class__(f"pair {pair.id!r}: {exc}") from exc
    return RetrievalIndex(entries, table_fingerprint(table, proj))


def _minmax(scores: np.ndarray) -> np.ndarray:
    lo, hi = scores.min(), scores.max()
    if hi - lo < 1e-12:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


def retrieve_topk(
    query_text: str,
    index: RetrievalIndex,
    table: EmbeddingTable,
    proj: ProjectionSet,
    weights: Weights,
    k: int,
    normalize_scores: bool = False,
) -> list[ScoredDemo]:
    """Top-k entries by fused score, descending; ties keep corpus order.

    Raises FingerprintMismatch if (table, proj) differ from what the index
    was built with, and EmptyQuery for blank queries. Returns all entries
    when the corpus is smaller than k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.fingerprint != table_fingerprint(table, proj):
        raise FingerprintMismatch(
            "index was built with a different embedding table or projections"
        )
    try:
        emb = embed_tokens(table, query_text)
    except EmptyText as exc:
        raise EmptyQuery(str(exc)) from exc
    q_dense = dense_embed(emb)
    q_sparse = sparse_embed(emb, proj)
    q_multi = multi_embed(emb, proj)

    dense_mat, multi_rows, offsets, sparse_inv = index._scan_arrays()
    n = len(index)

    sd = dense_mat @ q_dense.values.astype(np.float64)

    ss = np.zeros(n)
    for tid, w in q_sparse.weights.items():
        hit = sparse_inv.get(tid)
        if hit is not None:
            ss[hit[0]] += w * hit[1]

    sims = q_multi.rows.astype(np.float64) @ multi_rows.T
    per_entry_max = np.maximum.reduceat(sims, offsets, axis=1)
    sm = per_entry_max.mean(axis=0)

    if normalize_scores:
        sd, ss, sm = _minmax(sd), _minmax(ss), _minmax(sm)
    fused = weights.alpha1 * sd + weights.alpha2 * ss + weights.alpha3 * sm

    order = np.argsort(-fused, kind="stable")[:k]
    return [
        ScoredDemo(
            pair=index.entries[i].pair,
            s_dense=float(sd[i]),
            s_sparse=float(ss[i]),
            s_multi=float(sm[i]),
            s_rank=float(fused[i]),
        )
        for i in order
    ]


def save_index(index: RetrievalIndex, path: str | Path) -> None:
    """Write the index in the binary format (magic ``AFSPIDX1``)."""
    dim = index.entries[0].dense.values.shape[0]
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(index.fingerprint)
        _binio.write_u32(fh, len(index.entries))
        _binio.write_u32(fh, dim)
        for e in index.entries:
            for field in (
                e.pair.id,
                e.pair.src_text,
                e.pair.tgt_text,
                e.pair.src_lang,
                e.pair.tgt_lang,
            ):
                _binio.write_str(fh, field)
            _binio.write_f32_array(fh, e.dense.values)
            _binio.write_u32(fh, len(e.sparse.weights))
            for tid in sorted(e.sparse.weights):
                _binio.write_u32(fh, tid)
                _binio.write_f32(fh, e.sparse.weights[tid])
            _binio.write_u32(fh, e.multi.rows.shape[0])
            _binio.write_f32_array(fh, e.multi.rows)


def load_index(path: str | Path) -> RetrievalIndex:
    with open(path, "rb") as fh:
        _binio.check_magic(fh, INDEX_MAGIC)
        fingerprint = fh.read(32)
        if len(fingerprint) != 32:
            raise VersionMismatch("truncated file while reading fingerprint")
        count = _binio.read_u32(fh, "entry count")
        dim = _binio.read_u32(fh, "embedding dim")
        entries = []
        for i in range(count):
            what = f"entry {i}"
            pair = DemoPair(
                id=_binio.read_str(fh, what),
                src_text=_binio.read_str(fh, what),
                tgt_text=_binio.read_str(fh, what),
                src_lang=_binio.read_str(fh, what),
                tgt_lang=_binio.read_str(fh, what),
            )
            dense = DenseVec(values=_binio.read_f32_array(fh, dim, what))
            nnz = _binio.read_u32(fh, what)
            sparse: dict[int, float] = {}
            for _ in range(nnz):
                tid = _binio.read_u32(fh, what)
                sparse[tid] = _binio.read_f32(fh, what)
            n_rows = _binio.read_u32(fh, what)
            multi = _binio.read_f32_array(fh, n_rows * dim, what).reshape(n_rows, dim)
            entries.append(
                IndexEntry(
                    pair=pair,
                    dense=dense,
                    sparse=SparseWeights(weights=sparse),
                    multi=MultiVec(rows=multi),
                )
            )
    return RetrievalIndex(entries, fingerprint)
