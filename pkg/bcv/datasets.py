"""
Dataset plumbing: edge-list files, the builtin Southern Women incidence
matrix, and side-1 metadata tables.
"""

from __future__ import annotations

import logging
from pathlib import Path

import networkx as nx
import numpy as np
import pandas as pd

from bcv.errors import EdgeListParseError, GraphError
from bcv.graph_core import BipartiteGraph, LabelVector

logger = logging.getLogger(__name__)

BUILTIN_DATASETS = ("southern-women",)


def _parse_pair(line: str, line_number: int, delimiter: str | None) -> tuple[int, int]:
    tokens = [t for t in line.split(delimiter) if t.strip()] if delimiter else line.split()
    if len(tokens) < 2:
        raise EdgeListParseError(line_number, f"expected two integer tokens, got {line!r}")
    try:
        return int(tokens[0]), int(tokens[1])
    except ValueError:
        raise EdgeListParseError(line_number, f"non-integer token in {line!r}") from None


def ingest_edgelist(
    path: str | Path,
    one_indexed: bool = True,
    delimiter: str | None = None,
    header: bool = False,
) -> BipartiteGraph:
    """
    Read "i j" pairs, one per line; '#' lines and blank lines are skipped.

    With header=True the first data line holds "n1 n2"; otherwise the sizes
    are the largest indices seen. Duplicate edges are dropped with a warning.
    """
    path = Path(path)
    offset = 1 if one_indexed else 0
    dims: tuple[int, int] | None = None
    pairs: list[tuple[int, int]] = []

    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            i, j = _parse_pair(line, line_number, delimiter)
            if header and dims is None:
                if i < 1 or j < 1:
                    raise EdgeListParseError(line_number, f"header sizes must be positive, got {i} {j}")
                dims = (i, j)
                continue
            if i < offset or j < offset:
                raise EdgeListParseError(line_number, f"index below {offset} in {line!r}")
            i, j = i - offset, j - offset
            if dims is not None and (i >= dims[0] or j >= dims[1]):
                raise EdgeListParseError(line_number, f"edge {line!r} exceeds header sizes {dims}")
            pairs.append((i, j))

    if dims is None:
        if not pairs:
            raise GraphError(f"{path}: no edges, so neither side has any node")
        edges = np.asarray(pairs, dtype=np.int64)
        dims = (int(edges[:, 0].max()) + 1, int(edges[:, 1].max()) + 1)
    edges = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)

    unique = np.unique(edges, axis=0) if edges.size else edges
    dropped = edges.shape[0] - unique.shape[0]
    if dropped:
        logger.warning(f"{path}: dropped {dropped} duplicate edges")

    graph = BipartiteGraph.from_edges(dims[0], dims[1], unique)
    logger.info(f"Loaded {graph!r} from {path}")
    return graph


def write_edgelist(graph: BipartiteGraph, path: str | Path, one_indexed: bool = True, header: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    offset = 1 if one_indexed else 0
    with open(path, "w", encoding="utf-8") as f:
        if header:
            f.write(f"{graph.n1} {graph.n2}\n")
        for i, j in graph.edges():
            f.write(f"{i + offset} {j + offset}\n")
    return path


def southern_women() -> BipartiteGraph:
    """Davis Southern Women: 18 women (side 1) by 14 events (side 2)."""
    G = nx.davis_southern_women_graph()
    women, events = list(G.graph["top"]), list(G.graph["bottom"])
    row = {name: i for i, name in enumerate(women)}
    col = {name: j for j, name in enumerate(events)}
    edges = [(row[u], col[v]) if u in row else (row[v], col[u]) for u, v in G.edges()]
    return BipartiteGraph.from_edges(len(women), len(events), edges, women, events)


def load_dataset(source: str | Path, one_indexed: bool = True, delimiter: str | None = None) -> BipartiteGraph:
    """A builtin dataset id or an edge-list path."""
    if str(source) == "southern-women":
        return southern_women()
    path = Path(source)
    if not path.is_file():
        raise GraphError(f"{source!s} is neither a builtin dataset {BUILTIN_DATASETS} nor a readable file")
    return ingest_edgelist(path, one_indexed=one_indexed, delimiter=delimiter)


def load_metadata(
    path: str | Path,
    n: int,
    id_column: str = "id",
    label_column: str = "party",
    one_indexed: bool = True,
) -> tuple[LabelVector, list[str]]:
    """
    Side-1 categorical metadata (e.g. senator party) as a LabelVector.

    Categories are numbered in sorted order and returned alongside; every
    node 0..n-1 must have exactly one row.
    """
    frame = pd.read_csv(path)
    for column in (id_column, label_column):
        if column not in frame.columns:
            raise GraphError(f"{path}: missing column {column!r}")

    ids = frame[id_column].astype(np.int64).to_numpy() - (1 if one_indexed else 0)
    if ids.min(initial=0) < 0 or ids.max(initial=-1) >= n:
        raise GraphError(f"{path}: node ids outside the {n} side-1 nodes")
    if np.unique(ids).size != ids.size or ids.size != n:
        raise GraphError(f"{path}: expected exactly one row per side-1 node ({n}), got {ids.size}")

    codes, categories = pd.factorize(frame[label_column].astype(str), sort=True)
    labels = np.empty(n, dtype=np.int64)
    labels[ids] = codes
    return LabelVector(labels, len(categories), 1), [str(c) for c in categories]
