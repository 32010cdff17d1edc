"""
Tests for the simulation and dataset workflows
"""

import json
from pathlib import Path

import pandas as pd
import pytest

from bcv.config import BcvConfig, ExperimentConfig
from workflow.dataset_pipeline import run_dataset
from workflow.simulation_pipeline import SimulationWorkflow, run_experiment

FAST_BCV = BcvConfig(folds=3, restarts=2, patience=1, max_frontier=4)

TOY_EDGES = "1 1\n1 2\n2 1\n2 2\n3 3\n3 4\n4 3\n4 4\n"


def small_experiment(**overrides):
    values = dict(setting="balanced-1", r=0.5, sizes=(8,), reps=2, methods=("bcv",), seed=5, bcv=FAST_BCV)
    values.update(overrides)
    return ExperimentConfig(**values)


def test_replication_state_flow():
    workflow = SimulationWorkflow(small_experiment(methods=("bcv", "projection")))
    state = workflow.run_replication(8, 0)
    assert state["n1"] == 24 and state["n2"] == 24
    assert state["completed_steps"][0] == "generate_network"
    assert "record" in state["completed_steps"]
    assert set(state["estimates"]) == {"bcv", "projection"}
    assert [row["method"] for row in state["rows"]] == ["bcv", "projection"]


def test_experiment_is_deterministic(tmp_path):
    config = small_experiment()
    first = run_experiment(config, str(tmp_path / "a"))
    second = run_experiment(config, str(tmp_path / "b"))
    assert first.rows == second.rows
    assert first.table == second.table
    assert (tmp_path / "a" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()
    assert (tmp_path / "a" / "replications.csv").read_bytes() == (tmp_path / "b" / "replications.csv").read_bytes()

    manifests = [json.loads((tmp_path / d / "manifest.json").read_text()) for d in ("a", "b")]
    for manifest in manifests:
        assert set(manifest["metadata"]) == {"run_id", "started", "finished", "timings", "versions"}
        del manifest["metadata"]
    assert manifests[0] == manifests[1]


def test_workers_do_not_change_results():
    serial = run_experiment(small_experiment(reps=3))
    threaded = run_experiment(small_experiment(reps=3, workers=3))
    assert serial.rows == threaded.rows


def test_repeated_runs_compare_equal():
    first = run_experiment(small_experiment())
    second = run_experiment(small_experiment())
    assert first.run_id != second.run_id
    assert first == second


def test_table_rows_per_size_and_method(tmp_path):
    record = run_experiment(small_experiment(sizes=(6, 8), methods=("bcv", "bimodularity")), str(tmp_path))
    assert [(row["size"], row["method"]) for row in record.table] == [
        (6, "bcv"),
        (6, "bimodularity"),
        (8, "bcv"),
        (8, "bimodularity"),
    ]
    assert len(record.rows) == 2 * 2 * 2
    assert record.truth == (3, 3)
    for row in record.table:
        assert row["reps"] == 2 and row["failed"] == 0
        assert 0.0 <= row["rate1"] <= 1.0
    frame = pd.read_csv(tmp_path / "replications.csv")
    assert len(frame) == 8


def test_failed_replications_are_recorded_and_excluded(tmp_path):
    custom = {"B": [[0.5, 0.5]], "pi1": [1.0], "pi2": [1.0, 0.0], "n1": 10, "n2": 10}
    config = small_experiment(setting="custom", custom=custom, reps=3)
    record = run_experiment(config, str(tmp_path))
    assert len(record.rows) == 3
    assert all("empty" in row["error"] for row in record.rows)
    assert record.table[0]["failed"] == 3
    assert record.table[0]["reps"] == 0
    assert record.rates(0) == (0.0, 0.0)


def test_dataset_run_on_toy_blocks_leave_one_pair_out(tmp_path):
    source = tmp_path / "toy.txt"
    source.write_text(TOY_EDGES)
    report = run_dataset(str(source), BcvConfig(folds=16, patience=None), output=str(tmp_path / "out"))
    assert report.ok
    assert report.result.selected == (2, 2)
    assert report.refit.labels1.labels.tolist() == [0, 0, 1, 1]
    for key in ("surface", "slice", "labels1", "labels2"):
        assert Path(report.outputs[key]).exists()
    assert Path(report.outputs["slice"]).name == "surface_K1-2.csv"


def test_dataset_run_with_metadata(tmp_path):
    source = tmp_path / "toy.txt"
    source.write_text(TOY_EDGES)
    meta = tmp_path / "meta.csv"
    meta.write_text("id,party\n1,D\n2,D\n3,R\n4,R\n")
    report = run_dataset(str(source), BcvConfig(folds=16, patience=None), metadata_path=str(meta), grid=(2, 2))
    assert report.ok
    assert report.comparison["ari"] == 1.0
    assert report.comparison["consistent"] == 4
    assert report.comparison["categories"] == ["D", "R"]


def test_dataset_run_reports_load_errors(tmp_path):
    report = run_dataset(str(tmp_path / "missing.txt"))
    assert not report.ok
    assert report.result is None
    assert report.errors[0].startswith("load_network")


def test_dataset_errors_are_bcv_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 one\n")
    report = run_dataset(str(bad))
    assert not report.ok
    assert "line 1" in report.errors[0]


@pytest.mark.slow
def test_southern_women_pipeline(tmp_path):
    report = run_dataset("southern-women", BcvConfig(seed=1), output=str(tmp_path))
    assert report.ok
    assert 1 <= report.result.K1hat <= 18
    assert len(pd.read_csv(tmp_path / "labels_side1.csv")) == 18
