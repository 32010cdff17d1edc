"""
Recovery rates, label agreement after optimal matching, and adjusted Rand index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score

from bcv.errors import BcvError
from bcv.graph_core import LabelVector

MAX_MATCHED_CLUSTERS = 64

Labels = LabelVector | Sequence[int] | np.ndarray


def _as_array(labels: Labels) -> np.ndarray:
    if isinstance(labels, LabelVector):
        return labels.labels
    return np.asarray(labels).ravel()


def _paired(a: Labels, b: Labels) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_array(a), _as_array(b)
    if a.size != b.size:
        raise BcvError(f"label vectors differ in length: {a.size} vs {b.size}")
    return a, b


def adjusted_rand_index(a: Labels, b: Labels) -> float:
    a, b = _paired(a, b)
    if a.size < 2:
        raise BcvError("adjusted Rand index needs at least two labelled nodes")
    return float(adjusted_rand_score(a, b))


def confusion_matrix(a: Labels, b: Labels) -> np.ndarray:
    """Counts of (a-cluster, b-cluster) co-occurrences, padded to square."""
    a, b = _paired(a, b)
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    size = max(ia.max(initial=-1), ib.max(initial=-1)) + 1
    table = np.zeros((size, size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def label_agreement(a: Labels, b: Labels) -> float:
    """Largest fraction of positions on which a and a relabelling of b agree."""
    table = confusion_matrix(a, b)
    if table.shape[0] > MAX_MATCHED_CLUSTERS:
        raise BcvError(f"label agreement supports at most {MAX_MATCHED_CLUSTERS} clusters, got {table.shape[0]}")
    if table.size == 0:
        return 1.0
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


@dataclass(frozen=True)
class RecoveryTally:
    reps: int
    hits1: int
    hits2: int

    def __post_init__(self):
        if self.reps < 0 or not (0 <= self.hits1 <= self.reps and 0 <= self.hits2 <= self.reps):
            raise BcvError(f"inconsistent tally: reps={self.reps}, hits=({self.hits1}, {self.hits2})")

    @property
    def rate1(self) -> float:
        return self.hits1 / self.reps if self.reps else 0.0

    @property
    def rate2(self) -> float:
        return self.hits2 / self.reps if self.reps else 0.0

    @property
    def rates(self) -> tuple[float, float]:
        return self.rate1, self.rate2


def tally_recovery(results: Iterable, truth: tuple[int, int]) -> RecoveryTally:
    """
    Counts of results whose side-1 (side-2) estimate equals the truth. Accepts
    SelectionResult objects or plain (K1hat, K2hat) pairs.
    """
    estimates = [(r.K1hat, r.K2hat) if hasattr(r, "K1hat") else tuple(r) for r in results]
    if not estimates:
        raise BcvError("cannot tally an empty result list")
    K1, K2 = truth
    return RecoveryTally(
        reps=len(estimates),
        hits1=sum(1 for k1, _ in estimates if k1 == K1),
        hits2=sum(1 for _, k2 in estimates if k2 == K2),
    )
