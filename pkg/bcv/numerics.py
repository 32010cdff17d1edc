"""
Numeric kernels consumed by the selection procedure: truncated SVD (exact or
randomized subspace iteration) and k-means with k-means++ restarts.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.cluster import kmeans_plusplus

from bcv.errors import NumericsError

logger = logging.getLogger(__name__)

EXACT_SVD_MAX_DIM = 512
OVERSAMPLES = 10
POWER_ITERATIONS = 7
BATCH_MAX_POINTS = 512
BATCH_MAX_ENTRIES = 2**20


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit seed from integer parts (master seed, indices...)."""
    sequence = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True, eq=False)
class TruncatedSvd:
    """Top-k singular triplets: U (n1 x k), sigma (k,), V (n2 x k)."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.size)

    def scaled(self, factor: float) -> TruncatedSvd:
        return TruncatedSvd(self.U, self.sigma * factor, self.V)

    def to_dense(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def _check_finite(M) -> None:
    values = M.data if sp.issparse(M) else M
    if not np.all(np.isfinite(values)):
        raise NumericsError("matrix has non-finite entries")


def _fix_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # first entry of each U column above round-off is made nonnegative
    for col in range(U.shape[1]):
        column = U[:, col]
        significant = np.flatnonzero(np.abs(column) > 1e-12)
        if significant.size and column[significant[0]] < 0:
            U[:, col] = -column
            V[:, col] = -V[:, col]
    return U, V


def _randomized_svd(M, k: int, tol: float, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    n1, n2 = M.shape
    width = min(k + OVERSAMPLES, n1, n2)

    Q, _ = np.linalg.qr(M @ rng.standard_normal((n2, width)))
    previous = None
    for iteration in range(POWER_ITERATIONS):
        W, _ = np.linalg.qr(M.T @ Q)
        Q, _ = np.linalg.qr(M @ W)
        sigma = np.linalg.svd(np.asarray(M.T @ Q).T, compute_uv=False)[:k]
        if previous is not None:
            change = np.max(np.abs(sigma - previous) / np.maximum(previous, np.finfo(float).tiny))
            if change < tol:
                logger.debug(f"subspace iteration converged after {iteration + 1} passes")
                break
        previous = sigma

    small = np.asarray(M.T @ Q).T
    Ub, sigma, Vt = np.linalg.svd(small, full_matrices=False)
    return Q @ Ub[:, :k], sigma[:k], Vt[:k].T


def truncated_svd(M, k: int, tol: float = 1e-8, seed: int = 0) -> TruncatedSvd:
    """
    Best rank-k approximation factors of M (dense array or scipy sparse).

    Matrices whose smaller side is at most EXACT_SVD_MAX_DIM go through a full
    dense SVD; larger ones through randomized subspace iteration with
    OVERSAMPLES extra columns and up to POWER_ITERATIONS passes, stopping
    early once singular values change by less than tol (relative).
    """
    if not sp.issparse(M):
        M = np.asarray(M, dtype=np.float64)
        if M.ndim != 2:
            raise NumericsError(f"expected a matrix, got shape {M.shape}")
    n1, n2 = M.shape
    if not 1 <= k <= min(n1, n2):
        raise NumericsError(f"rank k={k} outside [1, {min(n1, n2)}]")
    _check_finite(M)

    if min(n1, n2) <= EXACT_SVD_MAX_DIM:
        dense = M.toarray() if sp.issparse(M) else M
        U, sigma, Vt = np.linalg.svd(dense, full_matrices=False)
        U, sigma, V = U[:, :k].copy(), sigma[:k].copy(), Vt[:k].T.copy()
    else:
        U, sigma, V = _randomized_svd(M.tocsr() if sp.issparse(M) else M, k, tol, seed)

    U, V = _fix_signs(U, V)
    return TruncatedSvd(U, np.maximum(sigma, 0.0), V)


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    n_iter: int = 0


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("mkd,mkd->mk", diff, diff)


def _objective(points: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    diff = points - centers[labels]
    return float(np.einsum("md,md->", diff, diff))


def _lloyd(points: np.ndarray, K: int, seed: int, max_iter: int) -> KMeansResult:
    centers, _ = kmeans_plusplus(points, n_clusters=K, random_state=seed % (2**32))
    centers = np.array(centers, dtype=np.float64)

    labels = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        # argmin keeps the lowest center index on exact ties
        assignment = np.argmin(_squared_distances(points, centers), axis=1)
        if labels is not None and np.array_equal(assignment, labels):
            break
        labels = assignment

        for cluster in range(K):
            members = labels == cluster
            if members.any():
                centers[cluster] = points[members].mean(axis=0)
        empty = np.flatnonzero(np.bincount(labels, minlength=K) == 0)
        if empty.size:
            spread = np.einsum("md,md->m", points - centers[labels], points - centers[labels])
            for cluster in empty:
                far = int(np.argmax(spread))
                centers[cluster] = points[far]
                spread[far] = -1.0

    return KMeansResult(labels, centers, _objective(points, centers, labels), n_iter)


def _batched_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # points (m, d), centers (R, K, d) -> (R, m, K)
    diff = points[None, :, None, :] - centers[:, None, :, :]
    return np.einsum("rmkd,rmkd->rmk", diff, diff)


def _batched_seeding(points: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """k-means++ seeding for every row of `draws` (R x K uniforms) at once."""
    R, K = draws.shape
    m = points.shape[0]

    centers = np.empty((R, K, points.shape[1]))
    first = np.minimum((draws[:, 0] * m).astype(np.int64), m - 1)
    centers[:, 0] = points[first]
    closest = _batched_distances(points, centers[:, :1])[:, :, 0]
    for j in range(1, K):
        # D^2 sampling by inverse transform on the cumulative weights
        cumulative = np.cumsum(closest, axis=1)
        target = draws[:, j] * cumulative[:, -1]
        chosen = np.minimum((cumulative <= target[:, None]).sum(axis=1), m - 1)
        centers[:, j] = points[chosen]
        closest = np.minimum(closest, _batched_distances(points, centers[:, j : j + 1])[:, :, 0])
    return centers


def _batched_lloyd(points: np.ndarray, draws: np.ndarray, max_iter: int) -> tuple[np.ndarray, ...]:
    R, K = draws.shape
    m = points.shape[0]
    rows = np.arange(R)
    centers = _batched_seeding(points, draws)

    labels = np.full((R, m), -1, dtype=np.int64)
    n_iter = np.zeros(R, dtype=np.int64)
    active = np.ones(R, dtype=bool)
    for iteration in range(1, max_iter + 1):
        assignment = np.argmin(_batched_distances(points, centers), axis=2)
        active &= np.any(assignment != labels, axis=1)
        if not active.any():
            break
        labels[active] = assignment[active]
        n_iter[active] = iteration

        one_hot = (labels[:, :, None] == np.arange(K)).astype(np.float64)
        counts = one_hot.sum(axis=1)
        sums = np.matmul(one_hot.transpose(0, 2, 1), points)
        means = sums / np.maximum(counts, 1.0)[:, :, None]
        filled = active[:, None] & (counts > 0)
        centers = np.where(filled[:, :, None], means, centers)

        for r, cluster in zip(*np.nonzero(active[:, None] & (counts == 0))):
            diff = points - centers[r, labels[r]]
            spread = np.einsum("md,md->m", diff, diff)
            spread[np.all(points[:, None, :] == centers[r][None, :, :], axis=2).any(axis=1)] = -1.0
            centers[r, cluster] = points[int(np.argmax(spread))]

    # converged restarts have n_iter one short of the pass that confirmed them
    n_iter = np.where(active, n_iter, np.minimum(n_iter + 1, max_iter))
    diff = points[None, :, :] - centers[rows[:, None], labels]
    objectives = np.einsum("rmd,rmd->r", diff, diff)
    return labels, centers, objectives, n_iter


def _distinct_rows(points: np.ndarray, K: int) -> KMeansResult | None:
    distinct, first, inverse = np.unique(points, axis=0, return_index=True, return_inverse=True)
    if distinct.shape[0] > K:
        return None
    inverse = inverse.reshape(-1)
    # relabel distinct rows in order of first appearance
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    centers = np.vstack([points[np.sort(first)], np.repeat(points[:1], K - first.size, axis=0)])
    return KMeansResult(rank[inverse], centers, 0.0, 0)


def kmeans(
    points: np.ndarray,
    K: int,
    restarts: int = 10,
    seed: int = 0,
    max_iter: int = 300,
    workers: int = 1,
) -> KMeansResult:
    """
    Lloyd's algorithm from k-means++ seeds, best objective over `restarts`
    runs; ties go to the earliest restart.

    When the points have at most K distinct rows the partition into distinct
    rows is returned without any restart. Up to BATCH_MAX_POINTS points all
    restarts run together on stacked arrays, restart r seeded from row r of
    default_rng(seed).random((restarts, K)); larger inputs run one restart at
    a time from derive_seed(seed, r). Either way a run with more restarts
    extends one with fewer, and scheduling across workers does not change
    the result.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    m = points.shape[0]
    if K < 1 or K > m:
        raise NumericsError(f"cannot form K={K} clusters from {m} points")
    if restarts < 1:
        raise NumericsError(f"restarts must be positive, got {restarts}")
    if not np.all(np.isfinite(points)):
        raise NumericsError("points have non-finite coordinates")

    shortcut = _distinct_rows(points, K)
    if shortcut is not None:
        return shortcut

    if m <= BATCH_MAX_POINTS:
        return _kmeans_batched(points, K, restarts, seed, max_iter, workers)

    seeds = [derive_seed(seed, r) for r in range(restarts)]
    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            runs = list(executor.map(lambda s: _lloyd(points, K, s, max_iter), seeds))
    else:
        runs = [_lloyd(points, K, s, max_iter) for s in seeds]

    best = runs[0]
    for run in runs[1:]:
        if run.objective < best.objective:
            best = run
    return best


def _kmeans_batched(
    points: np.ndarray, K: int, restarts: int, seed: int, max_iter: int, workers: int
) -> KMeansResult:
    draws = np.random.default_rng(seed).random((restarts, K))
    m, d = points.shape
    size = max(1, BATCH_MAX_ENTRIES // (m * K * d))
    chunks = [draws[start : start + size] for start in range(0, restarts, size)]

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            runs = list(executor.map(lambda chunk: _batched_lloyd(points, chunk, max_iter), chunks))
    else:
        runs = [_batched_lloyd(points, chunk, max_iter) for chunk in chunks]

    labels, centers, objectives, n_iter = (np.concatenate(parts) for parts in zip(*runs))
    best = int(np.argmin(objectives))
    return KMeansResult(labels[best].copy(), centers[best].copy(), float(objectives[best]), int(n_iter[best]))
