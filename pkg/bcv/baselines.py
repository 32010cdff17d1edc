"""
Comparison methods: one-mode projection followed by Louvain modularity
clustering, and BRIM-style bimodularity co-clustering.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp

from bcv.errors import GraphError
from bcv.graph_core import BipartiteGraph, LabelVector
from bcv.numerics import derive_seed

logger = logging.getLogger(__name__)

LOUVAIN_RESOLUTION = 1.0
BRIM_MAX_MODULES = 25
BRIM_RESTARTS = 10
BRIM_MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Symmetric nonnegative weights with a zero diagonal."""

    weights: sp.csr_matrix

    def __post_init__(self):
        W = sp.csr_matrix(self.weights, dtype=np.float64)
        if W.shape[0] != W.shape[1]:
            raise GraphError(f"weight matrix must be square, got {W.shape}")
        W = sp.csr_matrix(W - sp.diags(W.diagonal()))
        W.eliminate_zeros()
        if W.nnz and W.data.min() < 0:
            raise GraphError("weights must be nonnegative")
        if (W != W.T).nnz:
            raise GraphError("weights must be symmetric")
        object.__setattr__(self, "weights", W)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    def weight(self, u: int, v: int) -> float:
        return float(self.weights[u, v])

    def to_networkx(self) -> nx.Graph:
        G = nx.from_scipy_sparse_array(self.weights, edge_attribute="weight")
        G.add_nodes_from(range(self.n))
        return G


def project(graph: BipartiteGraph, side: int) -> WeightedGraph:
    """Co-neighbor counts: weight(u, v) = number of shared neighbors, u != v."""
    if side == 1:
        co = graph.csr @ graph.csr.T
    elif side == 2:
        co = graph.csc.T @ graph.csc
    else:
        raise GraphError(f"side must be 1 or 2, got {side}")
    return WeightedGraph(sp.csr_matrix(co))


def _ordered(communities: list[set[int]], n: int, side: int) -> LabelVector:
    labels = np.empty(n, dtype=np.int64)
    for label, members in enumerate(sorted(communities, key=min)):
        labels[list(members)] = label
    return LabelVector(labels, len(communities), side)


def modularity_communities(G: WeightedGraph, seed: int = 0, side: int = 1) -> LabelVector:
    """
    Louvain partition at resolution 1. Communities are numbered by their
    smallest node; isolated nodes come back as singletons.
    """
    if G.weights.nnz == 0:
        raise GraphError("projected graph has no positive weight")
    communities = nx.community.louvain_communities(
        G.to_networkx(), weight="weight", resolution=LOUVAIN_RESOLUTION, seed=seed % (2**32)
    )
    return _ordered([set(c) for c in communities], G.n, side)


def modularity(G: WeightedGraph, labels: LabelVector) -> float:
    groups = [set(np.flatnonzero(labels.labels == k).tolist()) for k in range(labels.K)]
    return float(nx.community.modularity(G.to_networkx(), [g for g in groups if g], weight="weight"))


def projection_counts(graph: BipartiteGraph, seed: int = 0) -> tuple[int, int]:
    """Communities found on each side's projection."""
    counts = []
    for side in (1, 2):
        labels = modularity_communities(project(graph, side), derive_seed(seed, side), side)
        counts.append(labels.num_nonempty())
    return counts[0], counts[1]


def bimodularity(graph: BipartiteGraph, modules1: np.ndarray, modules2: np.ndarray) -> float:
    """Q_B = (1/m) sum_ij (A_ij - d_i e_j / m) 1{g1_i = g2_j}."""
    m = graph.num_edges
    if m == 0:
        raise GraphError("bimodularity is undefined without edges")
    size = int(max(modules1.max(), modules2.max())) + 1
    d = graph.degrees(1).astype(np.float64)
    e = graph.degrees(2).astype(np.float64)
    inside = np.count_nonzero(modules1[graph.rows] == modules2[graph.cols])
    row_mass = np.bincount(modules1, weights=d, minlength=size)
    col_mass = np.bincount(modules2, weights=e, minlength=size)
    return float((inside - row_mass @ col_mass / m) / m)


@dataclass(frozen=True, eq=False)
class BrimRun:
    modules1: np.ndarray
    modules2: np.ndarray
    Q: float
    history: list[float] = field(default_factory=list)


def _argmax_assign(A: sp.csr_matrix, degrees: np.ndarray, other_modules: np.ndarray, other_degrees, m, c):
    # score[i, k] = sum_j A_ij 1{g_j = k} - d_i * (mass of module k on the other side) / m
    T = sp.csr_matrix(
        (np.ones(other_modules.size), (np.arange(other_modules.size), other_modules)),
        shape=(other_modules.size, c),
    )
    mass = np.bincount(other_modules, weights=other_degrees, minlength=c)
    score = np.asarray((A @ T).todense()) - np.outer(degrees, mass) / m
    return np.argmax(score, axis=1)


def brim(graph: BipartiteGraph, c: int, seed: int, max_sweeps: int = BRIM_MAX_SWEEPS) -> BrimRun:
    """
    Alternating maximization of Q_B with at most c modules from a random
    side-2 assignment. Each half-sweep is an exact best response, so the
    recorded Q history never decreases.
    """
    m = graph.num_edges
    if m == 0:
        raise GraphError("bimodularity needs at least one edge")
    rng = np.random.default_rng(seed)
    d = graph.degrees(1).astype(np.float64)
    e = graph.degrees(2).astype(np.float64)
    A, At = graph.csr, graph.csc.T.tocsr()

    modules2 = rng.integers(0, c, size=graph.n2)
    modules1 = _argmax_assign(A, d, modules2, e, m, c)
    history = [bimodularity(graph, modules1, modules2)]
    for _ in range(max_sweeps):
        modules2 = _argmax_assign(At, e, modules1, d, m, c)
        modules1 = _argmax_assign(A, d, modules2, e, m, c)
        Q = bimodularity(graph, modules1, modules2)
        history.append(Q)
        if Q <= history[-2] + 1e-12:
            break
    return BrimRun(modules1, modules2, history[-1], history)


def _renumber(modules: np.ndarray, side: int) -> LabelVector:
    _, first, inverse = np.unique(modules, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    relabeled = order[inverse]
    return LabelVector(relabeled, int(relabeled.max()) + 1, side)


def bimodularity_communities(
    graph: BipartiteGraph,
    max_modules: int = BRIM_MAX_MODULES,
    seed: int = 0,
    restarts: int = BRIM_RESTARTS,
    workers: int = 1,
) -> tuple[LabelVector, LabelVector]:
    """
    Best BRIM run over module counts 1..max_modules with `restarts` random
    starts each. Nodes are split back into their sides and each side's
    nonempty modules become that side's communities.
    """
    if graph.num_edges == 0:
        raise GraphError("bimodularity needs at least one edge")
    jobs = [(c, r) for c in range(1, max_modules + 1) for r in range(restarts)]
    run_one = lambda job: brim(graph, job[0], derive_seed(seed, job[0], job[1]))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            runs = list(executor.map(run_one, jobs))
    else:
        runs = [run_one(job) for job in jobs]

    best = runs[0]
    for run in runs[1:]:
        if run.Q > best.Q + 1e-12:
            best = run
    logger.debug(f"BRIM best Q_B={best.Q:.4f}")
    return _renumber(best.modules1, 1), _renumber(best.modules2, 2)
