"""Multi-table sign-hash index with exact cosine rerank, and linear search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .projections import ProjectionMatrix
from .store import EmbeddingStore, StoreError

MAX_BITS = 64


class HashIndexError(ValueError):
    pass


@dataclass(frozen=True)
class HashKey:
    bits: int
    k: int


@dataclass
class QueryResult:
    ranked: list[tuple[str, float]]
    candidates_examined: int
    tables_probed: int
    # record positions and scores of every candidate, ranked; used by evaluation
    positions: np.ndarray = field(default=None, repr=False)
    scores: np.ndarray = field(default=None, repr=False)


def hash_bits(X: np.ndarray, p: ProjectionMatrix) -> np.ndarray:
    """Packed keys for the rows of ``X`` (uint64). Bit j set iff ``x.r_j + b_j >= 0``."""
    proj = np.asarray(X, dtype=np.float64) @ p.matrix + p.bias
    weights = np.left_shift(np.uint64(1), np.arange(p.k, dtype=np.uint64))
    return ((proj >= 0).astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)


def table_keys(X: np.ndarray, projections: Sequence[ProjectionMatrix]) -> np.ndarray:
    """(n, L) packed keys of the rows of ``X`` under every table, one matrix product."""
    X = np.asarray(X, dtype=np.float64)
    if not projections:
        return np.zeros((len(X), 0), dtype=np.uint64)
    k = projections[0].k
    stacked = np.hstack([p.matrix for p in projections])
    bias = np.concatenate([p.bias for p in projections])
    weights = np.left_shift(np.uint64(1), np.arange(k, dtype=np.uint64))
    bits = (X @ stacked + bias >= 0).reshape(len(X), len(projections), k)
    return (bits.astype(np.uint64) * weights).sum(axis=2, dtype=np.uint64)


def hash_vector(w, p: ProjectionMatrix) -> HashKey:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (p.d,):
        raise HashIndexError(f"vector has shape {w.shape}, projection expects ({p.d},)")
    if p.k > MAX_BITS:
        raise HashIndexError(f"k={p.k} exceeds {MAX_BITS} bits")
    return HashKey(int(hash_bits(w[None, :], p)[0]), p.k)


def hamming(a: HashKey, b: HashKey) -> int:
    if a.k != b.k:
        raise HashIndexError(f"key lengths differ ({a.k} vs {b.k})")
    return (a.bits ^ b.bits).bit_count()


def popcount64(x: np.ndarray) -> np.ndarray:
    """Vectorised population count of uint64 values."""
    x = np.asarray(x, dtype=np.uint64)
    return np.unpackbits(x.view(np.uint8).reshape(*x.shape, 8), axis=-1).sum(axis=-1)


def cosine_from_hamming(h: int, k: int) -> float:
    """Cosine implied by a Hamming distance between ``k``-bit sign codes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= h <= k:
        raise ValueError(f"hamming distance {h} outside [0, {k}]")
    return math.cos(math.pi * h / k)


def _unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def _unit(q: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q)
    return q / n if n > 0 else q


class _Ranker:
    """Shared cosine scoring and (score desc, id asc) ordering."""

    def __init__(self, store: EmbeddingStore):
        self.store = store
        self.unit = _unit_rows(store.vectors)
        order = np.argsort(np.array(store.ids, dtype=object), kind="stable")
        self.id_rank = np.empty(len(order), dtype=np.intp)
        self.id_rank[order] = np.arange(len(order))

    def check(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.store.dimension,):
            raise HashIndexError(f"query has shape {q.shape}, expected ({self.store.dimension},)")
        return q

    def scores(self, positions: np.ndarray, q: np.ndarray) -> np.ndarray:
        # positions are sorted and unique, so full length means every row
        rows = self.unit if len(positions) == len(self.unit) else self.unit[positions]
        # einsum reduces each row on its own; BLAS gemv results depend on the
        # batch, which would break exact agreement between hash and linear scores
        return np.einsum("ij,j->i", rows, _unit(q))

    def rank(self, positions: np.ndarray, q: np.ndarray, top_n, tables_probed: int) -> QueryResult:
        scores = self.scores(positions, q)
        order = np.lexsort((self.id_rank[positions], -scores))
        positions, scores = positions[order], scores[order]
        cut = len(order) if top_n is None else top_n
        ranked = [(self.store.ids[p], float(s)) for p, s in zip(positions[:cut], scores[:cut])]
        return QueryResult(ranked, len(order), tables_probed, positions, scores)


class HashIndex:
    """``L`` hash tables over a subset of a store.

    Buckets map packed keys to ascending arrays of record positions. Queries
    return the union of matching buckets reranked by exact cosine.
    """

    def __init__(self, store: EmbeddingStore, projections: Sequence[ProjectionMatrix], subset: Iterable[str] | None = None):
        projections = list(projections)
        for p in projections:
            if p.d != store.dimension:
                raise HashIndexError(f"projection dimension {p.d} != store dimension {store.dimension}")
            if p.k != projections[0].k:
                raise HashIndexError("projections mix different k")
            if p.k > MAX_BITS:
                raise HashIndexError(f"k={p.k} exceeds {MAX_BITS} bits")
        if subset is None:
            members = np.arange(len(store), dtype=np.intp)
        else:
            try:
                members = np.unique(store.positions(subset))
            except StoreError as exc:
                raise HashIndexError(str(exc)) from None
        self.store = store
        self.projections = projections
        self.members = members
        self._ranker = _Ranker(store)

        self.tables: list[dict[int, np.ndarray]] = []
        if projections:
            self._stacked = np.hstack([p.matrix for p in projections])
            self._bias = np.concatenate([p.bias for p in projections])
            self._weights = np.left_shift(np.uint64(1), np.arange(projections[0].k, dtype=np.uint64))
        all_keys = table_keys(store.vectors[members], projections)
        for l in range(len(projections)):
            keys = all_keys[:, l]
            uniq, inverse = np.unique(keys, return_inverse=True)
            order = np.argsort(inverse, kind="stable")
            bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
            grouped = members[order]
            self.tables.append(
                {int(key): grouped[bounds[i]:bounds[i + 1]] for i, key in enumerate(uniq)}
            )

    @property
    def k(self) -> int:
        return self.projections[0].k if self.projections else 0

    @property
    def L(self) -> int:
        return len(self.projections)

    def keys(self, q: np.ndarray) -> list[int]:
        """Packed key of ``q`` in every table."""
        if not self.projections:
            return []
        bits = (q[None, :] @ self._stacked + self._bias >= 0).reshape(self.L, self.k)
        return (bits.astype(np.uint64) * self._weights).sum(axis=1, dtype=np.uint64).tolist()

    def candidates(self, q: np.ndarray) -> np.ndarray:
        hits = [b for t, key in zip(self.tables, self.keys(q)) if (b := t.get(key)) is not None]
        if not hits:
            return np.empty(0, dtype=np.intp)
        return np.unique(np.concatenate(hits))

    def query(self, q, top_n: int | None = 10) -> QueryResult:
        if len(self.members) == 0:
            raise HashIndexError("empty index")
        q = self._ranker.check(q)
        return self._ranker.rank(self.candidates(q), q, top_n, self.L)

    def score(self, q) -> tuple[np.ndarray, np.ndarray]:
        """Unranked candidate positions and their cosine scores."""
        q = self._ranker.check(q)
        pos = self.candidates(q)
        return pos, self._ranker.scores(pos, q)

    def bucket_sizes(self) -> list[list[int]]:
        """Occupied bucket sizes, one list per table, largest first."""
        return [sorted((len(b) for b in t.values()), reverse=True) for t in self.tables]


def build(store: EmbeddingStore, projections: Sequence[ProjectionMatrix], subset: Iterable[str] | None = None) -> HashIndex:
    return HashIndex(store, projections, subset)


class LinearIndex:
    """Exhaustive cosine search over a subset; the exact baseline."""

    def __init__(self, store: EmbeddingStore, subset: Iterable[str] | None = None):
        if subset is None:
            self.members = np.arange(len(store), dtype=np.intp)
        else:
            self.members = np.unique(store.positions(subset))
        self.store = store
        self._ranker = _Ranker(store)

    def query(self, q, top_n: int | None = 10) -> QueryResult:
        if len(self.members) == 0:
            raise HashIndexError("empty index")
        q = self._ranker.check(q)
        return self._ranker.rank(self.members, q, top_n, 0)

    def score(self, q) -> tuple[np.ndarray, np.ndarray]:
        q = self._ranker.check(q)
        return self.members, self._ranker.scores(self.members, q)


def linear_search(store: EmbeddingStore, q, subset: Iterable[str] | None = None, top_n: int | None = 10) -> QueryResult:
    return LinearIndex(store, subset).query(q, top_n)
