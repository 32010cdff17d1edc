"""
Bipartite graphs, bipartite stochastic block models and community labels.

All indices are 0-based. Graphs and label vectors are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from bcv.errors import EmptyCommunityError, GraphError, SpecError

logger = logging.getLogger(__name__)

# Bounded resampling of multinomial memberships that leave a community empty
MAX_MEMBERSHIP_RETRIES = 100


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """
    0/1 bi-adjacency matrix A with n1 rows (side 1) and n2 columns (side 2).

    Edges are stored as a coordinate list sorted row-major; CSR and CSC views
    are built lazily for row- and column-oriented access.
    """

    n1: int
    n2: int
    rows: np.ndarray
    cols: np.ndarray
    names1: tuple[str, ...] | None = None
    names2: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.n1) < 1 or int(self.n2) < 1:
            raise GraphError(f"both sides need at least one node, got n1={self.n1}, n2={self.n2}")
        object.__setattr__(self, "n1", int(self.n1))
        object.__setattr__(self, "n2", int(self.n2))

        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise GraphError("row and column index arrays differ in length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.n1:
                raise GraphError(f"row index out of range [0, {self.n1})")
            if cols.min() < 0 or cols.max() >= self.n2:
                raise GraphError(f"column index out of range [0, {self.n2})")

        flat = rows * self.n2 + cols
        order = np.argsort(flat, kind="stable")
        flat = flat[order]
        if flat.size > 1 and np.any(flat[1:] == flat[:-1]):
            raise GraphError("duplicate edges")

        object.__setattr__(self, "rows", _frozen(rows[order]))
        object.__setattr__(self, "cols", _frozen(cols[order]))

        for side, names, n in ((1, self.names1, self.n1), (2, self.names2, self.n2)):
            if names is not None and len(names) != n:
                raise GraphError(f"side {side} has {n} nodes but {len(names)} names")
        if self.names1 is not None:
            object.__setattr__(self, "names1", tuple(str(x) for x in self.names1))
        if self.names2 is not None:
            object.__setattr__(self, "names2", tuple(str(x) for x in self.names2))

    @classmethod
    def from_edges(
        cls,
        n1: int,
        n2: int,
        edges: Sequence[tuple[int, int]] | np.ndarray,
        names1: Sequence[str] | None = None,
        names2: Sequence[str] | None = None,
    ) -> BipartiteGraph:
        pairs = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        return cls(
            n1,
            n2,
            pairs[:, 0],
            pairs[:, 1],
            tuple(names1) if names1 is not None else None,
            tuple(names2) if names2 is not None else None,
        )

    @classmethod
    def from_dense(cls, matrix: np.ndarray | Sequence[Sequence[int]]) -> BipartiteGraph:
        dense = np.asarray(matrix)
        if dense.ndim != 2:
            raise GraphError("bi-adjacency matrix must be two-dimensional")
        if not np.all((dense == 0) | (dense == 1)):
            raise GraphError("bi-adjacency matrix must be 0/1")
        rows, cols = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], rows, cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n1, self.n2

    @property
    def num_edges(self) -> int:
        return int(self.rows.size)

    @property
    def density(self) -> float:
        return self.num_edges / (self.n1 * self.n2)

    @cached_property
    def flat_index(self) -> np.ndarray:
        """Sorted row-major linear indices i * n2 + j of the edges."""
        return _frozen(self.rows * self.n2 + self.cols)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        data = np.ones(self.num_edges, dtype=np.float64)
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=self.shape)

    @cached_property
    def csc(self) -> sp.csc_matrix:
        return self.csr.tocsc()

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def edges(self) -> Iterator[tuple[int, int]]:
        for i, j in zip(self.rows.tolist(), self.cols.tolist()):
            yield i, j

    def row_neighbors(self, i: int) -> np.ndarray:
        csr = self.csr
        return csr.indices[csr.indptr[i] : csr.indptr[i + 1]]

    def col_neighbors(self, j: int) -> np.ndarray:
        csc = self.csc
        return csc.indices[csc.indptr[j] : csc.indptr[j + 1]]

    def degrees(self, side: int) -> np.ndarray:
        if side == 1:
            return np.bincount(self.rows, minlength=self.n1)
        if side == 2:
            return np.bincount(self.cols, minlength=self.n2)
        raise GraphError(f"side must be 1 or 2, got {side}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )

    def __repr__(self) -> str:
        return f"BipartiteGraph(n1={self.n1}, n2={self.n2}, edges={self.num_edges})"


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Community labels in [0, K) for the nodes of one side (side 1 or 2)."""

    labels: np.ndarray
    K: int
    side: int = 1

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64).ravel()
        if int(self.K) < 1:
            raise SpecError(f"K must be positive, got {self.K}")
        if self.side not in (1, 2):
            raise SpecError(f"side must be 1 or 2, got {self.side}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise SpecError(f"labels must lie in [0, {self.K})")
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "K", int(self.K))

    def __len__(self) -> int:
        return int(self.labels.size)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def one_hot(self) -> sp.csr_matrix:
        """Membership matrix Z with exactly one 1 per row."""
        n = len(self)
        data = np.ones(n, dtype=np.float64)
        return sp.csr_matrix((data, (np.arange(n), self.labels)), shape=(n, self.K))

    def balance(self) -> float:
        """Smallest community share min_k n_k / n."""
        return float(self.counts().min() / len(self))

    def num_nonempty(self) -> int:
        return int(np.count_nonzero(self.counts()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelVector):
            return NotImplemented
        return self.K == other.K and self.side == other.side and np.array_equal(self.labels, other.labels)

    def __repr__(self) -> str:
        return f"LabelVector(side={self.side}, K={self.K}, n={len(self)})"


@dataclass(frozen=True, eq=False)
class ExplicitLabels:
    c1: np.ndarray
    c2: np.ndarray


@dataclass(frozen=True, eq=False)
class Multinomial:
    pi1: np.ndarray
    pi2: np.ndarray


@dataclass(frozen=True, eq=False)
class SbmSpec:
    """
    Bipartite stochastic block model: block probabilities B (K1 x K2) and a
    membership mechanism, either fixed labels or multinomial proportions.
    """

    B: np.ndarray
    membership: ExplicitLabels | Multinomial = field(default=None)

    def __post_init__(self):
        B = np.array(self.B, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] < 1 or B.shape[1] < 1:
            raise SpecError(f"B must be a non-empty K1 x K2 matrix, got shape {B.shape}")
        if not np.all(np.isfinite(B)) or B.min() < 0.0 or B.max() > 1.0:
            raise SpecError("B entries must lie in [0, 1]")
        object.__setattr__(self, "B", _frozen(B))

        membership = self.membership
        if membership is None:
            membership = Multinomial(np.full(self.K1, 1.0 / self.K1), np.full(self.K2, 1.0 / self.K2))
        if isinstance(membership, Multinomial):
            pi1 = self._check_proportions(membership.pi1, self.K1, 1)
            pi2 = self._check_proportions(membership.pi2, self.K2, 2)
            membership = Multinomial(pi1, pi2)
        elif isinstance(membership, ExplicitLabels):
            c1 = LabelVector(membership.c1, self.K1, 1).labels
            c2 = LabelVector(membership.c2, self.K2, 2).labels
            membership = ExplicitLabels(c1, c2)
        else:
            raise SpecError(f"unsupported membership mechanism: {type(membership).__name__}")
        object.__setattr__(self, "membership", membership)

    @staticmethod
    def _check_proportions(pi, K: int, side: int) -> np.ndarray:
        pi = np.array(pi, dtype=np.float64).ravel()
        if pi.size != K:
            raise SpecError(f"side {side} proportions have length {pi.size}, expected {K}")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise SpecError(f"side {side} proportions must be nonnegative and sum to 1")
        return _frozen(pi)

    @classmethod
    def scaled(
        cls, B0: np.ndarray, rho: float, membership: ExplicitLabels | Multinomial | None = None
    ) -> SbmSpec:
        """B = rho * B0."""
        return cls(rho * np.asarray(B0, dtype=np.float64), membership)

    @property
    def K1(self) -> int:
        return int(self.B.shape[0])

    @property
    def K2(self) -> int:
        return int(self.B.shape[1])


def _draw_labels(rng: np.random.Generator, pi: np.ndarray, n: int, side: int) -> np.ndarray:
    K = pi.size
    for attempt in range(MAX_MEMBERSHIP_RETRIES):
        labels = rng.choice(K, size=n, p=pi)
        if np.all(np.bincount(labels, minlength=K) > 0):
            if attempt:
                logger.debug(f"side {side} labels needed {attempt + 1} draws to fill {K} communities")
            return labels
    raise EmptyCommunityError(
        f"side {side}: a community stayed empty after {MAX_MEMBERSHIP_RETRIES} draws (n={n}, K={K})"
    )


def generate_sbm(spec: SbmSpec, n1: int, n2: int, seed: int) -> tuple[BipartiteGraph, LabelVector, LabelVector]:
    """
    Sample A with A_ij ~ Bernoulli(B[c1_i, c2_j]) independently.

    Each block draws its edge count from a binomial and then places the edges
    uniformly without replacement, which is the same law as independent
    Bernoulli entries. Output is a pure function of (spec, n1, n2, seed).
    """
    if n1 < 1 or n2 < 1:
        raise SpecError(f"node counts must be positive, got n1={n1}, n2={n2}")
    rng = np.random.default_rng(seed)

    membership = spec.membership
    if isinstance(membership, ExplicitLabels):
        if membership.c1.size != n1 or membership.c2.size != n2:
            raise SpecError(
                f"explicit labels have lengths ({membership.c1.size}, {membership.c2.size}), expected ({n1}, {n2})"
            )
        c1, c2 = membership.c1, membership.c2
    else:
        c1 = _draw_labels(rng, membership.pi1, n1, 1)
        c2 = _draw_labels(rng, membership.pi2, n2, 2)

    members1 = [np.flatnonzero(c1 == k) for k in range(spec.K1)]
    members2 = [np.flatnonzero(c2 == k) for k in range(spec.K2)]

    row_chunks, col_chunks = [], []
    for k1, rows_k in enumerate(members1):
        for k2, cols_k in enumerate(members2):
            size = rows_k.size * cols_k.size
            if size == 0:
                continue
            m = int(rng.binomial(size, spec.B[k1, k2]))
            if m == 0:
                continue
            cells = rng.choice(size, size=m, replace=False)
            row_chunks.append(rows_k[cells // cols_k.size])
            col_chunks.append(cols_k[cells % cols_k.size])

    rows = np.concatenate(row_chunks) if row_chunks else np.empty(0, dtype=np.int64)
    cols = np.concatenate(col_chunks) if col_chunks else np.empty(0, dtype=np.int64)
    graph = BipartiteGraph(n1, n2, rows, cols)
    return graph, LabelVector(c1, spec.K1, 1), LabelVector(c2, spec.K2, 2)


def _check_label_dims(spec: SbmSpec, c1: LabelVector, c2: LabelVector) -> None:
    if c1.K != spec.K1 or c2.K != spec.K2:
        raise SpecError(f"labels declare ({c1.K}, {c2.K}) communities, spec has ({spec.K1}, {spec.K2})")


def true_mean_matrix(spec: SbmSpec, c1: LabelVector, c2: LabelVector) -> np.ndarray:
    """P = Z1 B Z2^T, i.e. P_ij = B[c1_i, c2_j]."""
    _check_label_dims(spec, c1, c2)
    return spec.B[np.ix_(c1.labels, c2.labels)]


def scaled_block_matrix(B: np.ndarray, c1: LabelVector, c2: LabelVector) -> np.ndarray:
    """B_bar = N1^{1/2} B N2^{1/2} with N_r the diagonal community sizes."""
    root1 = np.sqrt(c1.counts().astype(np.float64))
    root2 = np.sqrt(c2.counts().astype(np.float64))
    return root1[:, None] * np.asarray(B, dtype=np.float64) * root2[None, :]


def reduced_svd_factors(
    spec: SbmSpec, c1: LabelVector, c2: LabelVector
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Left factor, singular values and right factor of P built from the SVD of
    B_bar: P = (Zbar1 U) diag(sigma) (Zbar2 V)^T with Zbar_r = Z_r N_r^{-1/2}.
    """
    _check_label_dims(spec, c1, c2)
    counts1, counts2 = c1.counts(), c2.counts()
    if np.any(counts1 == 0) or np.any(counts2 == 0):
        raise SpecError("every community must be nonempty to normalise the membership matrices")

    U, sigma, Vt = np.linalg.svd(scaled_block_matrix(spec.B, c1, c2), full_matrices=False)
    zbar1 = c1.one_hot() @ sp.diags(1.0 / np.sqrt(counts1))
    zbar2 = c2.one_hot() @ sp.diags(1.0 / np.sqrt(counts2))
    return np.asarray(zbar1 @ U), sigma, np.asarray(zbar2 @ Vt.T)
