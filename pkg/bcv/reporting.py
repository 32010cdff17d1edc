"""
CSV and JSON outputs: loss surfaces and their fixed-K1 slices, recovery
tables, per-replication records, label exports and the run manifest.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import pandas as pd

from bcv.errors import BcvError
from bcv.graph_core import LabelVector
from bcv.selection import SelectionResult, SurfaceEntry

logger = logging.getLogger(__name__)

SURFACE_COLUMNS = ["K1", "K2", "mse", "penalty", "total", "n_visited_step"]
SLICE_COLUMNS = ["K2", "mse", "penalty", "total"]
TABLE_COLUMNS = ["setting", "balance", "r", "size", "method", "rate1", "rate2", "reps", "failed"]
REPLICATION_COLUMNS = [
    "setting",
    "balance",
    "r",
    "size",
    "rep",
    "seed",
    "method",
    "n1",
    "n2",
    "K1hat",
    "K2hat",
    "lambda",
    "rho_hat",
    "balance1",
    "balance2",
    "error",
]


def surface_frame(result: SelectionResult) -> pd.DataFrame:
    if not result.surface:
        raise BcvError("selection result has an empty loss surface")
    rows = [
        {"K1": K1, "K2": K2, "mse": e.mse, "penalty": e.penalty, "total": e.total, "n_visited_step": e.step}
        for (K1, K2), e in sorted(result.surface.items())
    ]
    return pd.DataFrame(rows, columns=SURFACE_COLUMNS)


def slice_frame(result: SelectionResult, K1: int) -> pd.DataFrame:
    """Losses along K2 at a fixed K1."""
    frame = surface_frame(result)
    part = frame[frame["K1"] == K1]
    if part.empty:
        raise BcvError(f"no visited candidate has K1={K1}")
    return part[SLICE_COLUMNS].reset_index(drop=True)


def _write(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def write_surface(result: SelectionResult, path: str | Path) -> Path:
    return _write(surface_frame(result), path)


def read_surface(path: str | Path) -> dict[tuple[int, int], SurfaceEntry]:
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = set(SURFACE_COLUMNS) - set(frame.columns)
    if missing:
        raise BcvError(f"{path}: not a surface file, missing {sorted(missing)}")
    return {
        (int(r.K1), int(r.K2)): SurfaceEntry(float(r.mse), float(r.penalty), float(r.total), int(r.n_visited_step))
        for r in frame.itertuples(index=False)
    }


def emit_heatmap(result: SelectionResult, path: str | Path, K1: int | None = None) -> tuple[Path, Path]:
    """
    Writes the long-format surface to `path` and the slice at K1 (default:
    the selected K1) next to it as <stem>_K1-<k>.csv.
    """
    path = Path(path)
    K1 = result.K1hat if K1 is None else K1
    surface_path = write_surface(result, path)
    slice_path = _write(slice_frame(result, K1), path.with_name(f"{path.stem}_K1-{K1}{path.suffix or '.csv'}"))
    logger.info(f"Wrote loss surface to {surface_path} and K1={K1} slice to {slice_path}")
    return surface_path, slice_path


def write_labels(
    path: str | Path, labels: LabelVector, names: Sequence[str] | None = None, reference: LabelVector | None = None
) -> Path:
    frame = pd.DataFrame({"node": range(len(labels)), "community": labels.labels})
    if names is not None:
        frame.insert(1, "name", list(names))
    if reference is not None:
        frame["reference"] = reference.labels
    return _write(frame, path)


def write_table(rows: Iterable[Mapping[str, Any]], path: str | Path) -> Path:
    return _write(pd.DataFrame(list(rows), columns=TABLE_COLUMNS), path)


def write_replications(rows: Iterable[Mapping[str, Any]], path: str | Path) -> Path:
    return _write(pd.DataFrame(list(rows), columns=REPLICATION_COLUMNS), path)


def write_manifest(path: str | Path, body: Mapping[str, Any], metadata: Mapping[str, Any]) -> Path:
    """
    JSON manifest. Everything run-dependent (run id, timestamps, timings,
    versions) goes under "metadata"; the rest is a function of the config.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {**body, "metadata": dict(metadata)}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True, default=str)
    return path
