"""
End-to-end recovery checks on the simulation settings and Southern Women.

These take minutes and are deselected by default; run with `pytest -m slow`.
"""

import time
from collections import Counter

import pytest

from bcv.config import BcvConfig, ExperimentConfig
from bcv.datasets import southern_women
from bcv.selection import select
from workflow.dataset_pipeline import run_dataset
from workflow.simulation_pipeline import run_experiment

pytestmark = pytest.mark.slow

DEFAULT_BCV = BcvConfig(folds=10, C=0.01, patience=3)


def sweep(setting, r, size, methods=("bcv",), reps=20, seed=2024):
    config = ExperimentConfig(
        setting=setting, r=r, sizes=(size,), reps=reps, methods=methods, seed=seed, workers=4, bcv=DEFAULT_BCV
    )
    return run_experiment(config)


def test_balanced_one_strong_signal():
    record = sweep("balanced-1", 0.05, 300)
    rate1, rate2 = record.rates(300)
    assert rate1 >= 0.9 and rate2 >= 0.9


def test_balanced_one_weak_signal_does_not_succeed():
    record = sweep("balanced-1", 0.05, 100)
    rate1, rate2 = record.rates(100)
    assert rate1 <= 0.1 and rate2 <= 0.1


def test_balanced_two_asymmetric_counts():
    record = sweep("balanced-2", 0.1, 300)
    assert record.truth == (3, 4)
    rate1, rate2 = record.rates(300)
    assert rate1 >= 0.9 and rate2 >= 0.9


def test_polynomial_growth():
    record = sweep("poly-1", 0.2, 100)
    rate1, rate2 = record.rates(100)
    assert rate1 >= 0.9 and rate2 >= 0.9


def test_bimodularity_baseline():
    record = sweep("balanced-1", 0.1, 200, methods=("bimodularity",))
    rate1, rate2 = record.rates(200, "bimodularity")
    assert rate1 >= 0.8 and rate2 >= 0.8


def test_single_block_selects_one_pair():
    custom = {"B": [[0.5]], "pi1": [1.0], "pi2": [1.0], "n1": 200, "n2": 200}
    config = ExperimentConfig(setting="custom", custom=custom, sizes=(0,), reps=20, seed=11, workers=4, bcv=DEFAULT_BCV)
    record = run_experiment(config)
    hits = sum(1 for row in record.rows if (row["K1hat"], row["K2hat"]) == (1, 1))
    assert hits >= 18


def test_southern_women_counts():
    picks = []
    for seed in range(10):
        report = run_dataset("southern-women", BcvConfig(seed=seed))
        assert report.ok, report.errors
        picks.append(report.result.selected)
    women = Counter(K1 for K1, _ in picks)
    events = Counter(K2 for _, K2 in picks)
    assert women[2] >= 9
    assert events.most_common(1)[0][0] == 3
    assert all(K2 in {2, 3, 4} for _, K2 in picks), picks


def test_southern_women_selection_time():
    graph = southern_women()
    start = time.perf_counter()
    select(graph, BcvConfig())
    assert time.perf_counter() - start < 45.0
