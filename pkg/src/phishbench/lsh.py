"""Random-hyperplane (sign) LSH for cosine similarity.

Each table hashes a vector to the sign pattern of projections onto seeded
Gaussian hyperplanes; two vectors collide per bit with probability
1 - theta/pi. Hyperplanes come from numpy's PCG64 generator so indexes are
reproducible from (seed, n_bits, n_tables, dim) alone.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DimensionMismatchError
from .text_vectors import SparseVector, cosine_distance
from .validation import check_positive_int


class SignLsh(BaseEstimator):
    """Multi-table sign-LSH index over SparseVectors.

    Immutable after fit; queries are safe to run concurrently. Signatures
    are scale-invariant: signature(v) == signature(c*v) for c > 0.
    """

    def __init__(self, n_bits: int = 16, n_tables: int = 1, seed: int = 0):
        self.n_bits = n_bits
        self.n_tables = n_tables
        self.seed = seed

    def fit(self, vectors: Sequence[SparseVector], ids: Sequence | None = None, dim: int | None = None):
        check_positive_int("n_bits", self.n_bits)
        check_positive_int("n_tables", self.n_tables)
        vectors = list(vectors)
        if ids is None:
            ids = list(range(len(vectors)))
        ids = list(ids)
        if len(ids) != len(vectors):
            raise ValueError("ids and vectors must align")
        if vectors:
            dims = {v.dim for v in vectors}
            if len(dims) > 1:
                raise DimensionMismatchError(f"mixed vector dims: {sorted(dims)}")
            dim = dims.pop()
        if dim is None:
            raise ValueError("dim is required for an empty index")
        self.dim_ = dim
        rng = np.random.default_rng(self.seed)
        self.hyperplanes_ = rng.standard_normal((self.n_tables * self.n_bits, dim))
        self.bins_: list[dict[int, list]] = [dict() for _ in range(self.n_tables)]
        self.ids_ = ids
        for vid, vec in zip(ids, vectors):
            for table, sig in enumerate(self.signature(vec)):
                self.bins_[table].setdefault(sig, []).append(vid)
        return self

    def _project(self, v: SparseVector) -> np.ndarray:
        if v.dim != self.dim_:
            raise DimensionMismatchError(f"vector dim {v.dim} != index dim {self.dim_}")
        if not v.entries:
            return np.zeros(self.n_tables * self.n_bits)
        idx = np.fromiter(v.entries.keys(), dtype=np.intp, count=len(v.entries))
        weights = np.fromiter(v.entries.values(), dtype=np.float64, count=len(v.entries))
        return self.hyperplanes_[:, idx] @ weights

    def signature(self, v: SparseVector) -> tuple[int, ...]:
        """One packed integer signature per table; bit i is [dot(v, h_i) >= 0]."""
        bits = (self._project(v) >= 0.0).reshape(self.n_tables, self.n_bits)
        powers = 1 << np.arange(self.n_bits, dtype=np.uint64)
        return tuple(int(row.astype(np.uint64) @ powers) for row in bits)

    def signature_bits(self, v: SparseVector) -> np.ndarray:
        """Raw boolean bit array, shape (n_tables, n_bits)."""
        return (self._project(v) >= 0.0).reshape(self.n_tables, self.n_bits)

    def query(self, v: SparseVector) -> set:
        """Union over tables of members sharing v's bin."""
        out: set = set()
        for table, sig in enumerate(self.signature(v)):
            out.update(self.bins_[table].get(sig, ()))
        return out

    def table_groups(self, table: int = 0) -> dict[int, list]:
        """signature -> member ids for one table (cleaning-stage grouping)."""
        return self.bins_[table]

    def to_json(self) -> str:
        """Parameters only; bins are rebuilt from vectors on load."""
        return json.dumps({"n_bits": self.n_bits, "n_tables": self.n_tables,
                           "seed": self.seed, "dim": self.dim_})

    @classmethod
    def from_json(cls, payload: str, vectors: Sequence[SparseVector],
                  ids: Sequence | None = None) -> "SignLsh":
        obj = json.loads(payload)
        index = cls(n_bits=obj["n_bits"], n_tables=obj["n_tables"], seed=obj["seed"])
        return index.fit(vectors, ids=ids, dim=obj["dim"])


def build_index(vectors: Sequence[SparseVector], n_bits: int = 16, n_tables: int = 1,
                seed: int = 0, ids: Sequence | None = None) -> SignLsh:
    return SignLsh(n_bits=n_bits, n_tables=n_tables, seed=seed).fit(vectors, ids=ids)


def query_candidates(index: SignLsh, v: SparseVector) -> set:
    return index.query(v)


def exact_neighbors(vectors: Mapping | Iterable[SparseVector], query: SparseVector,
                    max_distance: float) -> set:
    """Brute-force oracle: ids of all vectors with cosine distance <= max_distance.

    A 1e-12 slack absorbs float rounding so max_distance=0 still matches
    positive scalar multiples.
    """
    if isinstance(vectors, Mapping):
        items = vectors.items()
    else:
        items = enumerate(vectors)
    out = set()
    for vid, vec in items:
        if cosine_distance(query, vec) <= max_distance + 1e-12:
            out.add(vid)
    return out
