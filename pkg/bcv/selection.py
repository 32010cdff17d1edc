"""
Bipartite cross-validation for choosing (K1, K2).

Each replication holds out a set of vertex pairs, completes the training
matrix by a rank-min(K1', K2') truncated SVD inflated by 1/w, clusters the
singular vectors on each side, estimates block probabilities from training
pairs only and scores the held-out pairs. The penalized loss is averaged over
replications and minimized over a frontier of candidates that grows by
max(K1', K2').
"""

from __future__ import annotations

import itertools
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import scipy.sparse as sp

from bcv.config import BcvConfig
from bcv.errors import ConfigError, DegenerateMatrixError, NumericsError, SplitError
from bcv.graph_core import BipartiteGraph, LabelVector, SbmSpec, scaled_block_matrix
from bcv.numerics import TruncatedSvd, derive_seed, kmeans, truncated_svd

logger = logging.getLogger(__name__)

# Seed stream for the full-observation refit, kept apart from replication indices
REFIT_STREAM = 2**31 - 1

# Small graphs repeat K-fold until this many pairs are scored in total
MIN_HELD_OUT_EVALUATIONS = 5000
MAX_AUTO_REPEATS = 20

DRule = Callable[[int, int], float]


def product_rule(K1p: int, K2p: int) -> float:
    return float(K1p * K2p)


@dataclass(frozen=True)
class TableRule:
    """Parameter counts read from a CSV with columns K1,K2,d."""

    table: dict[tuple[int, int], float]

    @classmethod
    def from_csv(cls, path: str | Path) -> TableRule:
        frame = pd.read_csv(path)
        missing = {"K1", "K2", "d"} - set(frame.columns)
        if missing:
            raise ConfigError(f"{path}: d_rule table lacks columns {sorted(missing)}")
        return cls({(int(r.K1), int(r.K2)): float(r.d) for r in frame.itertuples(index=False)})

    def __call__(self, K1p: int, K2p: int) -> float:
        try:
            return self.table[(K1p, K2p)]
        except KeyError:
            raise ConfigError(f"d_rule table has no entry for ({K1p}, {K2p})") from None


def resolve_d_rule(rule: str | DRule) -> DRule:
    if callable(rule):
        return rule
    if rule == "product":
        return product_rule
    if not Path(rule).is_file():
        raise ConfigError(f"d_rule must be 'product' or a CSV path, got {rule!r}")
    return TableRule.from_csv(rule)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KFold:
    folds: int = 10
    repeats: int = 1


@dataclass(frozen=True)
class Bernoulli:
    w: float = 0.9
    replications: int = 1


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """
    Replication-indexed partition of the n1 x n2 pairs into training and
    evaluation sets. Under K-fold, replication s is fold s % folds of repeat
    s // folds; every repeat permutes the pairs afresh.
    """

    n1: int
    n2: int
    mode: KFold | Bernoulli
    seed: int
    fold_of: tuple[np.ndarray, ...] = ()

    @property
    def num_pairs(self) -> int:
        return self.n1 * self.n2

    @property
    def w(self) -> float:
        if isinstance(self.mode, KFold):
            return 1.0 - 1.0 / self.mode.folds
        return float(self.mode.w)

    @property
    def replications(self) -> int:
        if isinstance(self.mode, KFold):
            return self.mode.folds * self.mode.repeats
        return self.mode.replications

    def training_mask(self, s: int) -> np.ndarray:
        """Boolean mask over flat pair indices i * n2 + j; True = training."""
        if not 0 <= s < self.replications:
            raise SplitError(f"replication {s} outside [0, {self.replications})")
        if isinstance(self.mode, KFold):
            repeat, fold = divmod(s, self.mode.folds)
            return self.fold_of[repeat] != fold
        rng = np.random.default_rng(derive_seed(self.seed, s))
        return rng.random(self.num_pairs) < self.mode.w

    def evaluation_mask(self, s: int) -> np.ndarray:
        return ~self.training_mask(s)


def make_split(n1: int, n2: int, mode: KFold | Bernoulli, seed: int) -> SplitPlan:
    """
    K-fold: a random permutation of the pair indices is cut into `folds`
    near-equal blocks (block sizes differ by at most one).
    Bernoulli: each pair is in training with probability w, independently per
    replication; masks are regenerated from the seed on demand.
    """
    num_pairs = n1 * n2
    if isinstance(mode, KFold):
        if mode.folds < 2:
            raise SplitError(f"K-fold needs at least 2 folds, got {mode.folds}")
        if mode.folds > num_pairs:
            raise SplitError(f"{mode.folds} folds exceed the {num_pairs} vertex pairs")
        if mode.repeats < 1:
            raise SplitError(f"repeats must be positive, got {mode.repeats}")
        dtype = np.int16 if mode.folds < 2**15 else np.int64
        position_fold = (np.arange(num_pairs, dtype=np.int64) * mode.folds // num_pairs).astype(dtype)
        fold_of = []
        for repeat in range(mode.repeats):
            rng = np.random.default_rng(derive_seed(seed, repeat))
            folds = np.empty(num_pairs, dtype=dtype)
            folds[rng.permutation(num_pairs)] = position_fold
            folds.setflags(write=False)
            fold_of.append(folds)
        return SplitPlan(n1, n2, mode, seed, tuple(fold_of))

    if isinstance(mode, Bernoulli):
        if not 0.0 < mode.w < 1.0:
            raise SplitError(f"Bernoulli training proportion must lie in (0, 1), got {mode.w}")
        if mode.replications < 1:
            raise SplitError(f"replications must be positive, got {mode.replications}")
        return SplitPlan(n1, n2, mode, seed)

    raise SplitError(f"unknown split mode {mode!r}")


def kfold_repeats(n1: int, n2: int, folds: int, repeats: int | None = None) -> int:
    """
    Number of fresh K-fold plans. An explicit count is kept; otherwise plans
    are added until MIN_HELD_OUT_EVALUATIONS pairs are scored across repeats,
    at most MAX_AUTO_REPEATS of them. Leave-one-pair-out has a single plan.
    """
    if repeats is not None:
        return int(repeats)
    if folds >= n1 * n2:
        return 1
    return min(MAX_AUTO_REPEATS, max(1, math.ceil(MIN_HELD_OUT_EVALUATIONS / (n1 * n2))))


def plan_from_config(graph: BipartiteGraph, config: BcvConfig) -> SplitPlan:
    if config.mode == "kfold":
        mode = KFold(config.folds, kfold_repeats(graph.n1, graph.n2, config.folds, config.repeats))
    else:
        mode = Bernoulli(config.w, config.replications)
    return make_split(graph.n1, graph.n2, mode, derive_seed(config.seed, 0))


@dataclass(frozen=True, eq=False)
class HeldOut:
    """Training matrix and evaluation pairs of one replication."""

    Y: sp.csr_matrix
    train_rows: np.ndarray
    train_cols: np.ndarray
    eval_rows: np.ndarray
    eval_cols: np.ndarray
    eval_values: np.ndarray
    n_train_pairs: int

    @property
    def n_eval(self) -> int:
        return int(self.eval_rows.size)

    @property
    def training_density(self) -> float:
        return self.train_rows.size / self.n_train_pairs if self.n_train_pairs else 0.0


def _as_flat_mask(graph: BipartiteGraph, training: np.ndarray) -> np.ndarray:
    mask = np.asarray(training, dtype=bool)
    if mask.shape == graph.shape:
        mask = mask.ravel()
    if mask.shape != (graph.n1 * graph.n2,):
        raise SplitError(f"training mask has shape {mask.shape}, expected {graph.shape} or flat")
    return mask


def hold_out(graph: BipartiteGraph, training: np.ndarray) -> HeldOut:
    mask = _as_flat_mask(graph, training)
    keep = mask[graph.flat_index]
    train_rows, train_cols = graph.rows[keep], graph.cols[keep]
    Y = sp.csr_matrix(
        (np.ones(train_rows.size, dtype=np.float64), (train_rows, train_cols)), shape=graph.shape
    )

    eval_flat = np.flatnonzero(~mask)
    eval_rows, eval_cols = np.divmod(eval_flat, graph.n2)
    # flat_index is sorted, so membership is a binary search
    position = np.searchsorted(graph.flat_index, eval_flat)
    position = np.minimum(position, max(graph.num_edges - 1, 0))
    if graph.num_edges:
        eval_values = (graph.flat_index[position] == eval_flat).astype(np.float64)
    else:
        eval_values = np.zeros(eval_flat.size, dtype=np.float64)

    return HeldOut(
        Y=Y,
        train_rows=train_rows,
        train_cols=train_cols,
        eval_rows=eval_rows,
        eval_cols=eval_cols,
        eval_values=eval_values,
        n_train_pairs=int(np.count_nonzero(mask)),
    )


# ---------------------------------------------------------------------------
# Completion, labels, blocks
# ---------------------------------------------------------------------------


def _complete(Y: sp.csr_matrix, w: float, k: int, seed: int) -> TruncatedSvd:
    if not 0.0 < w <= 1.0:
        raise SplitError(f"training proportion must lie in (0, 1], got {w}")
    return truncated_svd(Y, k, seed=seed).scaled(1.0 / w)


def complete_matrix(
    graph: BipartiteGraph, training: np.ndarray, w: float, k: int, seed: int = 0
) -> TruncatedSvd:
    """
    (1/w) times the rank-k truncated SVD of Y = A restricted to training
    pairs, kept in factored form (U, sigma / w, V).
    """
    if not 1 <= k <= min(graph.n1, graph.n2):
        raise NumericsError(f"rank k={k} outside [1, {min(graph.n1, graph.n2)}]")
    return _complete(hold_out(graph, training).Y, w, k, seed)


def _first_appearance(labels: np.ndarray) -> np.ndarray:
    values, first = np.unique(labels, return_index=True)
    mapping = np.empty(int(values.max()) + 1, dtype=np.int64)
    mapping[values[np.argsort(first)]] = np.arange(values.size)
    return mapping[labels]


def cluster_side(
    completed: TruncatedSvd, side: int, K: int, restarts: int = 10, seed: int = 0, workers: int = 1
) -> LabelVector:
    """
    k-means on the rows of U (side 1) or V (side 2) with seed
    derive_seed(seed, side, K). The result depends on the completion and K
    only, so one clustering serves every candidate sharing them.
    """
    points = completed.U if side == 1 else completed.V
    result = kmeans(points, K, restarts=restarts, seed=derive_seed(seed, side, K), workers=workers)
    return LabelVector(_first_appearance(result.labels), K, side)


def estimate_labels(
    completed: TruncatedSvd, K1p: int, K2p: int, restarts: int = 10, seed: int = 0, workers: int = 1
) -> tuple[LabelVector, LabelVector]:
    """k-means on the rows of U (K1p clusters) and of V (K2p clusters)."""
    if completed.rank != min(K1p, K2p):
        raise NumericsError(f"completion rank {completed.rank} differs from min({K1p}, {K2p})")
    return (
        cluster_side(completed, 1, K1p, restarts, seed, workers),
        cluster_side(completed, 2, K2p, restarts, seed, workers),
    )


def _block_estimate(held: HeldOut, c1: np.ndarray, c2: np.ndarray, K1p: int, K2p: int) -> np.ndarray:
    cells = K1p * K2p
    edges = np.bincount(c1[held.train_rows] * K2p + c2[held.train_cols], minlength=cells)
    block_pairs = np.outer(np.bincount(c1, minlength=K1p), np.bincount(c2, minlength=K2p)).ravel()
    held_pairs = np.bincount(c1[held.eval_rows] * K2p + c2[held.eval_cols], minlength=cells)
    pairs = block_pairs - held_pairs

    Bhat = np.full(cells, held.training_density, dtype=np.float64)
    observed = pairs > 0
    Bhat[observed] = edges[observed] / pairs[observed]
    return np.clip(Bhat, 0.0, 1.0).reshape(K1p, K2p)


def _check_labels(graph: BipartiteGraph, labels1: LabelVector, labels2: LabelVector, K1p: int, K2p: int):
    if len(labels1) != graph.n1 or len(labels2) != graph.n2:
        raise NumericsError(
            f"label lengths ({len(labels1)}, {len(labels2)}) do not match graph shape {graph.shape}"
        )
    if labels1.labels.max(initial=0) >= K1p or labels2.labels.max(initial=0) >= K2p:
        raise NumericsError(f"labels exceed the candidate counts ({K1p}, {K2p})")


def estimate_blocks(
    graph: BipartiteGraph,
    training: np.ndarray,
    labels1: LabelVector,
    labels2: LabelVector,
    K1p: int,
    K2p: int,
) -> np.ndarray:
    """
    Training-edge share per block: edges over training pairs between side-1
    community k1 and side-2 community k2. Blocks without a training pair get
    the global training density.
    """
    _check_labels(graph, labels1, labels2, K1p, K2p)
    return _block_estimate(hold_out(graph, training), labels1.labels, labels2.labels, K1p, K2p)


# ---------------------------------------------------------------------------
# Penalty and loss
# ---------------------------------------------------------------------------


def penalty_factor(graph: BipartiteGraph, C: float = 0.01, form: str = "sqrt-min") -> float:
    """
    lambda = C * rho_hat^1.5 / sqrt(min(n1, n2)) with rho_hat the edge density
    of the full matrix. form="log" gives C * rho_hat^2 / sqrt(log max(n1, n2)).
    """
    if C <= 0:
        raise ConfigError(f"C must be positive, got {C}")
    rho_hat = graph.density
    if rho_hat == 0.0:
        logger.warning("graph has no edges; penalty factor is 0 and every candidate ties")
        return 0.0
    if form == "sqrt-min":
        return C * rho_hat**1.5 / math.sqrt(min(graph.n1, graph.n2))
    if form == "log":
        n = max(graph.n1, graph.n2)
        if n < 2:
            raise ConfigError("the log penalty form needs max(n1, n2) >= 2")
        return C * rho_hat**2 / math.sqrt(math.log(n))
    raise ConfigError(f"unknown penalty form {form!r}")


@dataclass(frozen=True, eq=False)
class CandidateFit:
    K1p: int
    K2p: int
    k: int
    labels1: LabelVector
    labels2: LabelVector
    Bhat: np.ndarray
    test_mse: float
    penalty: float
    total: float


def _score(
    held: HeldOut,
    labels1: LabelVector,
    labels2: LabelVector,
    K1p: int,
    K2p: int,
    lam: float,
    d_rule: DRule,
) -> CandidateFit:
    if held.n_eval == 0:
        raise SplitError("evaluation set is empty")
    c1, c2 = labels1.labels, labels2.labels
    Bhat = _block_estimate(held, c1, c2, K1p, K2p)
    residual = held.eval_values - Bhat[c1[held.eval_rows], c2[held.eval_cols]]
    test_mse = float(np.dot(residual, residual) / held.n_eval)
    penalty = float(d_rule(K1p, K2p) * lam)
    return CandidateFit(
        K1p=K1p,
        K2p=K2p,
        k=min(K1p, K2p),
        labels1=labels1,
        labels2=labels2,
        Bhat=Bhat,
        test_mse=test_mse,
        penalty=penalty,
        total=test_mse + penalty,
    )


def score_labels(
    graph: BipartiteGraph,
    plan: SplitPlan,
    s: int,
    labels1: LabelVector,
    labels2: LabelVector,
    K1p: int,
    K2p: int,
    lam: float,
    d_rule: str | DRule = "product",
) -> CandidateFit:
    """Held-out penalized loss of given labels on replication s."""
    _check_labels(graph, labels1, labels2, K1p, K2p)
    return _score(hold_out(graph, plan.training_mask(s)), labels1, labels2, K1p, K2p, lam, resolve_d_rule(d_rule))


def candidate_loss(
    graph: BipartiteGraph,
    plan: SplitPlan,
    s: int,
    K1p: int,
    K2p: int,
    lam: float,
    d_rule: str | DRule = "product",
    seed: int = 0,
    restarts: int = 10,
) -> CandidateFit:
    """
    Full evaluation of one candidate on replication s. Completion and
    clustering both start from derive_seed(seed, s, k), matching what
    select() does for the same master seed.
    """
    if K1p < 1 or K2p < 1:
        raise NumericsError(f"candidate counts must be positive, got ({K1p}, {K2p})")
    held = hold_out(graph, plan.training_mask(s))
    k = min(K1p, K2p)
    stream = derive_seed(seed, s, k)
    completed = _complete(held.Y, plan.w, k, stream)
    labels1, labels2 = estimate_labels(completed, K1p, K2p, restarts, stream)
    return _score(held, labels1, labels2, K1p, K2p, lam, resolve_d_rule(d_rule))


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceEntry:
    mse: float
    penalty: float
    total: float
    step: int


@dataclass(frozen=True)
class FrontierStep:
    k: int
    evaluated: int
    step_best: tuple[int, int]
    step_best_total: float
    best: tuple[int, int]
    best_total: float
    stale: int


@dataclass(frozen=True, eq=False)
class SelectionResult:
    K1hat: int
    K2hat: int
    surface: dict[tuple[int, int], SurfaceEntry]
    trace: list[FrontierStep] = field(default_factory=list)
    lam: float = 0.0
    rho_hat: float = 0.0

    @property
    def selected(self) -> tuple[int, int]:
        return self.K1hat, self.K2hat

    def totals(self) -> dict[tuple[int, int], float]:
        return {pair: entry.total for pair, entry in self.surface.items()}


def _rank_key(surface: dict[tuple[int, int], SurfaceEntry]):
    # total, then fewer block parameters, then fewer side-1 communities
    return lambda pair: (surface[pair].total, pair[0] * pair[1], pair[0])


class _Evaluator:
    """
    Evaluates candidates over all replications. Hold-outs are built once per
    replication, completions cached per (s, k) and side clusterings per
    (s, k, side, K); all are pure functions of their key, so concurrent tasks
    may race to fill the caches harmlessly.
    """

    def __init__(self, graph: BipartiteGraph, config: BcvConfig, lam: float):
        self.graph = graph
        self.config = config
        self.lam = lam
        self.d_rule = resolve_d_rule(config.d_rule)
        self.plan = plan_from_config(graph, config)
        self._held: dict[int, HeldOut] = {}
        self._completions: dict[tuple[int, int], TruncatedSvd] = {}
        self._clusterings: dict[tuple[int, int, int, int], LabelVector] = {}
        self._lock = threading.Lock()

    def held_out(self, s: int) -> HeldOut:
        held = self._held.get(s)
        if held is None:
            held = hold_out(self.graph, self.plan.training_mask(s))
            with self._lock:
                held = self._held.setdefault(s, held)
        return held

    def completion(self, s: int, k: int) -> TruncatedSvd:
        cached = self._completions.get((s, k))
        if cached is None:
            cached = _complete(self.held_out(s).Y, self.plan.w, k, derive_seed(self.config.seed, s, k))
            with self._lock:
                cached = self._completions.setdefault((s, k), cached)
        return cached

    def clustering(self, s: int, k: int, side: int, K: int) -> LabelVector:
        key = (s, k, side, K)
        cached = self._clusterings.get(key)
        if cached is None:
            stream = derive_seed(self.config.seed, s, k)
            cached = cluster_side(self.completion(s, k), side, K, self.config.restarts, stream)
            with self._lock:
                cached = self._clusterings.setdefault(key, cached)
        return cached

    def task(self, pair: tuple[int, int], s: int) -> CandidateFit:
        K1p, K2p = pair
        k = min(K1p, K2p)
        labels1 = self.clustering(s, k, 1, K1p)
        labels2 = self.clustering(s, k, 2, K2p)
        return _score(self.held_out(s), labels1, labels2, K1p, K2p, self.lam, self.d_rule)

    def evaluate(self, pairs: list[tuple[int, int]], step_of: Callable[[tuple[int, int]], int]):
        S = self.plan.replications
        tasks = [(pair, s) for pair in pairs for s in range(S)]
        if self.config.workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
                fits = list(executor.map(lambda t: self.task(*t), tasks))
        else:
            fits = [self.task(*t) for t in tasks]

        # merged by key in replication order, independent of completion order
        by_key = {(t[0], t[1]): fit for t, fit in zip(tasks, fits)}
        entries = {}
        for pair in pairs:
            per_rep = [by_key[(pair, s)] for s in range(S)]
            entries[pair] = SurfaceEntry(
                mse=sum(f.test_mse for f in per_rep) / S,
                penalty=per_rep[0].penalty,
                total=sum(f.total for f in per_rep) / S,
                step=step_of(pair),
            )
        return entries


def _prepare(graph: BipartiteGraph, config: BcvConfig | None) -> tuple[BcvConfig, float]:
    config = config or BcvConfig()
    lam = penalty_factor(graph, config.C, config.penalty_form)
    logger.info(
        f"BCV on {graph!r}: rho_hat={graph.density:.4g}, lambda={lam:.4g}, "
        f"mode={config.mode}, w={config.training_proportion:.3g}"
    )
    return config, lam


def frontier_pairs(k: int) -> list[tuple[int, int]]:
    """Pairs with max(K1', K2') == k, K1' ascending then K2' ascending."""
    return [(i, k) for i in range(1, k)] + [(k, j) for j in range(1, k + 1)]


def select(graph: BipartiteGraph, config: BcvConfig | None = None) -> SelectionResult:
    """
    Frontier search: step k evaluates every pair with max(K1', K2') = k and
    stops once the best total has not strictly decreased for `patience`
    consecutive steps, or when k reaches max_frontier (capped at min(n1, n2)).
    Returns the argmin over all visited pairs.
    """
    config, lam = _prepare(graph, config)
    evaluator = _Evaluator(graph, config, lam)
    limit = min(graph.n1, graph.n2)
    if config.max_frontier is not None:
        limit = min(limit, config.max_frontier)
    patience = math.inf if config.patience is None else config.patience

    surface: dict[tuple[int, int], SurfaceEntry] = {}
    trace: list[FrontierStep] = []
    best: tuple[int, int] | None = None
    stale = 0
    for k in range(1, limit + 1):
        new = frontier_pairs(k)
        surface.update(evaluator.evaluate(new, lambda pair: max(pair)))
        step_best = min(new, key=_rank_key(surface))
        if best is None or surface[step_best].total < surface[best].total:
            best, stale = step_best, 0
        else:
            stale += 1
        trace.append(
            FrontierStep(k, len(new), step_best, surface[step_best].total, best, surface[best].total, stale)
        )
        logger.debug(f"frontier step {k}: best {best} total={surface[best].total:.6g} stale={stale}")
        if stale >= patience:
            break

    K1hat, K2hat = min(surface, key=_rank_key(surface))
    logger.info(f"Selected (K1, K2) = ({K1hat}, {K2hat}) after {len(trace)} frontier steps")
    return SelectionResult(K1hat, K2hat, surface, trace, lam, graph.density)


def grid_search(
    graph: BipartiteGraph, config: BcvConfig | None = None, K1_max: int = 5, K2_max: int = 5
) -> SelectionResult:
    """Every pair in [K1_max] x [K2_max], with the same per-task seeds as select()."""
    if not 1 <= K1_max <= graph.n1 or not 1 <= K2_max <= graph.n2:
        raise ConfigError(f"grid ({K1_max}, {K2_max}) outside the graph shape {graph.shape}")
    config, lam = _prepare(graph, config)
    evaluator = _Evaluator(graph, config, lam)
    pairs = list(itertools.product(range(1, K1_max + 1), range(1, K2_max + 1)))
    surface = evaluator.evaluate(pairs, lambda pair: max(pair))
    K1hat, K2hat = min(surface, key=_rank_key(surface))
    best = (K1hat, K2hat)
    trace = [FrontierStep(max(K1_max, K2_max), len(pairs), best, surface[best].total, best, surface[best].total, 0)]
    return SelectionResult(K1hat, K2hat, surface, trace, lam, graph.density)


@dataclass(frozen=True, eq=False)
class Refit:
    labels1: LabelVector
    labels2: LabelVector
    Bhat: np.ndarray
    sigma: np.ndarray


def refit(graph: BipartiteGraph, K1: int, K2: int, config: BcvConfig | None = None) -> Refit:
    """Labels and block estimates at (K1, K2) from the fully observed matrix."""
    config = config or BcvConfig()
    if not 1 <= K1 <= graph.n1 or not 1 <= K2 <= graph.n2:
        raise NumericsError(f"({K1}, {K2}) communities do not fit a {graph.shape} graph")
    held = hold_out(graph, np.ones(graph.n1 * graph.n2, dtype=bool))
    k = min(K1, K2)
    stream = derive_seed(config.seed, REFIT_STREAM, k)
    completed = _complete(held.Y, 1.0, k, stream)
    labels1, labels2 = estimate_labels(completed, K1, K2, config.restarts, stream)
    Bhat = _block_estimate(held, labels1.labels, labels2.labels, K1, K2)
    return Refit(labels1, labels2, Bhat, completed.sigma)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def incoherence_beta(spec: SbmSpec, c1: LabelVector, c2: LabelVector) -> float:
    """
    beta = 1 - max over 2-subsets I of [K2] of ||(V V^T - I)_I||_2, with V the
    right singular vectors of N1^{1/2} B N2^{1/2} at its numerical rank.
    """
    Bbar = scaled_block_matrix(spec.B, c1, c2)
    if not np.any(Bbar):
        raise DegenerateMatrixError("scaled block matrix is identically zero")
    _, sigma, Vt = np.linalg.svd(Bbar, full_matrices=False)
    tol = sigma[0] * max(Bbar.shape) * np.finfo(float).eps
    V = Vt[sigma > tol].T
    K2 = Bbar.shape[1]
    if K2 < 2:
        return 1.0
    gap = V @ V.T - np.eye(K2)
    worst = max(np.linalg.norm(gap[np.ix_(pair, pair)], 2) for pair in itertools.combinations(range(K2), 2))
    return float(1.0 - worst)


def penalty_diagnostics(graph: BipartiteGraph, lam: float, w: float, beta: float) -> dict[str, float]:
    """
    Where lambda sits against the rates in the consistency conditions: the
    first ratio should be small, the other two large.
    """
    rho_hat = graph.density
    n = max(graph.n1, graph.n2)
    small = lam / rho_hat**2 if rho_hat > 0 else math.inf
    large_spectral = lam * w * beta * min(graph.n1, graph.n2) / rho_hat if rho_hat > 0 else math.inf
    large_held_out = lam * graph.n1 * graph.n2 * (1.0 - w) / math.log(n) if n > 1 else math.inf
    return {
        "rho_hat": rho_hat,
        "lambda": lam,
        "lambda_over_rho_sq": small,
        "lambda_w_beta_n_over_rho": large_spectral,
        "lambda_pairs_held_out_over_log_n": large_held_out,
    }

