from typing import Any, Callable, Dict, Optional, Sequence
from importlib import metadata
import logging
import os
import time
import uuid

from langgraph.graph.state import CompiledStateGraph

TRACKED_PACKAGES = ("bipartite-cv", "numpy", "scipy", "scikit-learn", "networkx", "pandas", "langgraph")


def random_uuid():
    return str(uuid.uuid4())


def configure_logging(default: str = "INFO") -> None:
    """Root logging for entry points; level from BCV_LOG_LEVEL."""
    level = os.environ.get("BCV_LOG_LEVEL", default).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def package_versions(packages=TRACKED_PACKAGES) -> Dict[str, Optional[str]]:
    versions = {}
    for name in packages:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


class Stopwatch:
    """Named wall-clock timings, usable as `with watch.lap("name"): ...`."""

    def __init__(self):
        self.timings: Dict[str, float] = {}

    def lap(self, name: str):
        return _Lap(self, name)


class _Lap:
    def __init__(self, watch: Stopwatch, name: str):
        self.watch = watch
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = time.perf_counter() - self.start
        self.watch.timings[self.name] = self.watch.timings.get(self.name, 0.0) + elapsed
        return False


def invoke_graph(
    graph: CompiledStateGraph,
    inputs: dict,
    node_names: Sequence[str] = (),
    callback: Optional[Callable] = None,
) -> Dict[str, Any]:
    """
    Runs a compiled graph to completion and returns its final state.

    Args:
        graph: compiled LangGraph workflow
        inputs: initial state
        node_names: nodes whose updates reach the callback (all when empty)
        callback: called with {"node": str, "content": Any} after each node

    Returns:
        The final state values.
    """
    final_state: Dict[str, Any] = dict(inputs)
    for mode, chunk in graph.stream(inputs, stream_mode=["updates", "values"]):
        if mode == "values":
            final_state = chunk
            continue
        if callback is None or not isinstance(chunk, dict):
            continue
        for node_name, node_chunk in chunk.items():
            if node_names and node_name not in node_names:
                continue
            callback({"node": node_name, "content": node_chunk})
    return final_state
