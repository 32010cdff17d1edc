"""
Tests for the simulation settings
"""

import numpy as np
import pytest

from bcv.config import ExperimentConfig
from bcv.errors import ConfigError
from bcv.settings import HETEROGENEOUS_BASE, UNBALANCED, build_setting, large_base, node_counts


def test_balanced_three_fixed_base():
    setting = build_setting(ExperimentConfig(setting="balanced-3"))
    assert setting.truth == (10, 14)
    B0 = setting.base(np.random.default_rng(0))
    np.testing.assert_array_equal(np.diag(B0), np.ones(10))
    assert B0[0, 11] == 0.75 and B0[5, 12] == 0.75 and B0[9, 13] == 0.75
    assert B0[0, 12] == 0.25 and B0[9, 10] == 0.25
    np.testing.assert_array_equal(B0, large_base())


def test_poly_two_fixed_base():
    setting = build_setting(ExperimentConfig(setting="poly-2"))
    B0 = setting.base(np.random.default_rng(1))
    np.testing.assert_array_equal(B0, HETEROGENEOUS_BASE)
    assert B0.shape == (3, 6)
    np.testing.assert_array_equal(B0[0], [1, 0.25, 0.25, 0.75, 0.75, 0.25])


def test_random_base_ranges():
    setting = build_setting(ExperimentConfig(setting="balanced-2"))
    for seed in range(20):
        B0 = setting.base(np.random.default_rng(seed))
        assert B0.shape == (3, 4)
        diagonal = B0[np.arange(3), np.arange(3)]
        assert np.all((diagonal >= 0.7) & (diagonal <= 1.0))
        off = B0[~np.eye(3, 4, dtype=bool)]
        assert np.all((off >= 0.1) & (off <= 0.3))


def test_base_draw_is_fresh_per_seed():
    setting = build_setting(ExperimentConfig(setting="balanced-1"))
    a = setting.spec(0.1, seed=1).B
    b = setting.spec(0.1, seed=2).B
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(setting.spec(0.1, seed=1).B, a)


def test_node_counts():
    config = ExperimentConfig(setting="balanced-2")
    assert node_counts(build_setting(config), config, 100) == (300, 400)
    config = ExperimentConfig(setting="poly-1")
    assert node_counts(build_setting(config), config, 100) == (100, 1000)
    assert node_counts(build_setting(config), config, 30) == (30, 164)


def test_unbalanced_proportions():
    for name in ("balanced-1", "balanced-2", "balanced-3", "poly-1", "poly-2"):
        pi1, pi2 = UNBALANCED[name]
        assert abs(pi1.sum() - 1.0) <= 1e-12 and abs(pi2.sum() - 1.0) <= 1e-12
    setting = build_setting(ExperimentConfig(setting="balanced-2", balance="unbalanced"))
    np.testing.assert_allclose(setting.pi2, [3 / 8, 1 / 4, 1 / 4, 1 / 8])
    setting = build_setting(ExperimentConfig(setting="poly-2", balance="unbalanced"))
    np.testing.assert_allclose(setting.pi1, [1 / 2, 1 / 3, 1 / 6])
    np.testing.assert_allclose(setting.pi2, [1 / 4, 1 / 4, 1 / 6, 1 / 6, 1 / 12, 1 / 12])
    balanced = build_setting(ExperimentConfig(setting="poly-2"))
    np.testing.assert_allclose(balanced.pi2, np.full(6, 1 / 6))


def test_spec_scales_base_and_rejects_overflow():
    setting = build_setting(ExperimentConfig(setting="balanced-3"))
    spec = setting.spec(0.2, seed=0)
    np.testing.assert_allclose(spec.B, 0.2 * large_base())
    with pytest.raises(ConfigError):
        setting.spec(1.5, seed=0)
    with pytest.raises(ConfigError):
        setting.spec(0.0, seed=0)


def test_custom_setting_passes_through():
    block = {"B": [[0.5, 0.1], [0.1, 0.5]], "pi1": [0.5, 0.5], "pi2": [0.25, 0.75], "n1": 40, "n2": 60}
    config = ExperimentConfig(setting="custom", custom=block)
    setting = build_setting(config)
    assert setting.truth == (2, 2)
    assert node_counts(setting, config, 0) == (40, 60)
    spec = setting.spec(0.05, seed=3)
    np.testing.assert_array_equal(spec.B, [[0.5, 0.1], [0.1, 0.5]])
    np.testing.assert_array_equal(spec.membership.pi2, [0.25, 0.75])


def test_custom_setting_validation():
    with pytest.raises(ConfigError):
        build_setting(ExperimentConfig(setting="custom", custom={"pi1": [1.0]}))
    config = ExperimentConfig(setting="custom", custom={"B": [[0.5]]})
    with pytest.raises(ConfigError):
        node_counts(build_setting(config), config, 0)
