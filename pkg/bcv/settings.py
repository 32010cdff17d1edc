"""
Simulation settings: block-matrix laws, community proportions and node-count
growth for the balanced-growth and polynomial-growth experiments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from bcv.config import ExperimentConfig
from bcv.errors import ConfigError
from bcv.graph_core import Multinomial, SbmSpec

logger = logging.getLogger(__name__)

POLY_EXPONENT = 1.5


def random_base(K1: int, K2: int) -> Callable[[np.random.Generator], np.ndarray]:
    """Diagonal ~ U(0.7, 1), off-diagonal ~ U(0.1, 0.3), drawn independently."""

    def draw(rng: np.random.Generator) -> np.ndarray:
        B0 = rng.uniform(0.1, 0.3, size=(K1, K2))
        d = min(K1, K2)
        B0[np.arange(d), np.arange(d)] = rng.uniform(0.7, 1.0, size=d)
        return B0

    return draw


def fixed_base(B0: np.ndarray) -> Callable[[np.random.Generator], np.ndarray]:
    B0 = np.asarray(B0, dtype=np.float64)
    return lambda rng: B0.copy()


def large_base() -> np.ndarray:
    """10 x 14: unit diagonal, 0.75 on three off-diagonal column runs, 0.25 elsewhere."""
    B0 = np.full((10, 14), 0.25)
    B0[np.arange(10), np.arange(10)] = 1.0
    B0[0:3, 11] = 0.75
    B0[3:6, 12] = 0.75
    B0[6:10, 13] = 0.75
    return B0


HETEROGENEOUS_BASE = np.array(
    [
        [1.0, 0.25, 0.25, 0.75, 0.75, 0.25],
        [0.25, 1.0, 0.25, 0.75, 0.25, 0.75],
        [0.25, 0.25, 1.0, 0.25, 0.75, 0.75],
    ]
)


def uniform(K: int) -> np.ndarray:
    return np.full(K, 1.0 / K)


def _proportions(*fractions: tuple[int, int]) -> np.ndarray:
    # exact rationals, then renormalised so the sum is 1 to round-off
    pi = np.array([a / b for a, b in fractions])
    return pi / pi.sum()


@dataclass(frozen=True)
class Setting:
    name: str
    truth: tuple[int, int]
    growth: str
    base: Callable[[np.random.Generator], np.ndarray]
    pi1: np.ndarray
    pi2: np.ndarray

    def node_counts(self, size: int) -> tuple[int, int]:
        """Balanced growth: n_l = K_l * n0. Polynomial growth: size is n1, n2 = round(n1^1.5)."""
        if self.growth == "balanced":
            return self.truth[0] * size, self.truth[1] * size
        if self.growth == "poly":
            return size, int(round(size**POLY_EXPONENT))
        raise ConfigError(f"unknown growth {self.growth!r}")

    def spec(self, r: float, seed: int) -> SbmSpec:
        """B = r * B0 with B0 drawn afresh from `seed` when the law is random. Custom B is used as given."""
        B0 = self.base(np.random.default_rng(seed))
        if self.growth == "custom":
            r = 1.0
        if not 0 < r <= 1.0 / B0.max():
            raise ConfigError(f"r={r} takes r * B0 outside [0, 1]")
        return SbmSpec.scaled(B0, r, Multinomial(self.pi1, self.pi2))


UNBALANCED = {
    "balanced-1": (_proportions((1, 6), (1, 3), (1, 2)), _proportions((1, 6), (1, 3), (1, 2))),
    "balanced-2": (_proportions((1, 2), (1, 3), (1, 6)), _proportions((3, 8), (1, 4), (1, 4), (1, 8))),
    "balanced-3": (
        _proportions(*[(1, 15)] * 4, *[(1, 10)] * 2, *[(2, 15)] * 4),
        _proportions(*[(1, 21)] * 5, *[(1, 14)] * 4, *[(2, 21)] * 5),
    ),
    "poly-2": (_proportions((1, 2), (1, 3), (1, 6)), _proportions((1, 4), (1, 4), (1, 6), (1, 6), (1, 12), (1, 12))),
}
UNBALANCED["poly-1"] = UNBALANCED["balanced-1"]

SHAPES = {
    "balanced-1": ((3, 3), "balanced", random_base(3, 3)),
    "balanced-2": ((3, 4), "balanced", random_base(3, 4)),
    "balanced-3": ((10, 14), "balanced", fixed_base(large_base())),
    "poly-1": ((3, 3), "poly", random_base(3, 3)),
    "poly-2": ((3, 6), "poly", fixed_base(HETEROGENEOUS_BASE)),
}


def _custom(block: dict) -> Setting:
    try:
        B = np.asarray(block["B"], dtype=np.float64)
        pi1 = np.asarray(block.get("pi1", uniform(B.shape[0])), dtype=np.float64)
        pi2 = np.asarray(block.get("pi2", uniform(B.shape[1])), dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"custom setting needs B (and optionally pi1, pi2): {e}") from e
    if B.ndim != 2:
        raise ConfigError(f"custom B must be a matrix, got shape {B.shape}")
    return Setting("custom", (B.shape[0], B.shape[1]), "custom", fixed_base(B), pi1, pi2)


def build_setting(config: ExperimentConfig) -> Setting:
    """Resolve the setting id and balance regime of an experiment config."""
    name = config.setting
    if name == "custom":
        return _custom(dict(config.custom or {}))
    if name not in SHAPES:
        raise ConfigError(f"unknown setting {name!r}")
    truth, growth, base = SHAPES[name]
    if config.balance == "balanced":
        pi1, pi2 = uniform(truth[0]), uniform(truth[1])
    else:
        pi1, pi2 = UNBALANCED[name]
    return Setting(name, truth, growth, base, pi1, pi2)


def custom_node_counts(config: ExperimentConfig) -> tuple[int, int]:
    block = config.custom or {}
    try:
        return int(block["n1"]), int(block["n2"])
    except KeyError as e:
        raise ConfigError(f"custom setting needs n1 and n2: missing {e}") from e


def node_counts(setting: Setting, config: ExperimentConfig, size: int) -> tuple[int, int]:
    if setting.growth == "custom":
        return custom_node_counts(config)
    return setting.node_counts(size)
