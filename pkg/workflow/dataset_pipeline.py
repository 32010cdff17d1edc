"""
Dataset Pipeline - LangGraph Workflow
Load a bipartite network (edge list or builtin), select (K1, K2) by BCV,
refit labels on the full matrix, compare with metadata when given, export.
"""

import logging
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from bcv.config import BcvConfig
from bcv.datasets import load_dataset, load_metadata
from bcv.errors import BcvError
from bcv.metrics import adjusted_rand_index, label_agreement
from bcv.reporting import emit_heatmap, write_labels
from bcv.selection import Refit, SelectionResult, grid_search, refit, select
from utils import invoke_graph

logger = logging.getLogger(__name__)


class DatasetState(TypedDict, total=False):
    """State schema for one dataset run."""

    source: str
    one_indexed: bool
    grid: Optional[tuple]
    metadata_path: Optional[str]
    id_column: str
    label_column: str
    output: Optional[str]

    graph: Any
    result: Optional[SelectionResult]
    refit: Optional[Refit]
    comparison: Dict[str, Any]
    outputs: Dict[str, str]

    error_log: Annotated[List[str], operator.add]
    completed_steps: Annotated[List[str], operator.add]
    current_step: str


def _continue_unless_failed(state: DatasetState) -> str:
    return "failed" if state.get("error_log") else "ok"


class DatasetWorkflow:
    """Single-dataset BCV workflow."""

    def __init__(self, config: BcvConfig):
        self.config = config
        self.workflow = None
        self._build_workflow()

    def _build_workflow(self):
        workflow = StateGraph(DatasetState)

        workflow.add_node("load_network", self.load_network)
        workflow.add_node("select_counts", self.select_counts)
        workflow.add_node("refit_labels", self.refit_labels)
        workflow.add_node("compare_metadata", self.compare_metadata)
        workflow.add_node("export_results", self.export_results)

        workflow.set_entry_point("load_network")
        for step, following in (
            ("load_network", "select_counts"),
            ("select_counts", "refit_labels"),
            ("refit_labels", "compare_metadata"),
        ):
            workflow.add_conditional_edges(
                step, _continue_unless_failed, {"ok": following, "failed": END}
            )
        workflow.add_edge("compare_metadata", "export_results")
        workflow.add_edge("export_results", END)

        self.workflow = workflow.compile()

    def load_network(self, state: DatasetState) -> Dict[str, Any]:
        """Step 1: Read the edge list or builtin dataset."""
        try:
            graph = load_dataset(state["source"], one_indexed=state.get("one_indexed", True))
            logger.info(f"Loaded {state['source']}: {graph!r}")
            return {"current_step": "load_network", "graph": graph, "completed_steps": ["load_network"]}
        except (BcvError, OSError) as e:
            logger.error(f"Loading {state['source']} failed: {e}")
            return {"current_step": "load_network", "error_log": [f"load_network: {e}"]}

    def select_counts(self, state: DatasetState) -> Dict[str, Any]:
        """Step 2: Frontier search, or the full grid when one is given."""
        try:
            grid = state.get("grid")
            if grid:
                result = grid_search(state["graph"], self.config, grid[0], grid[1])
            else:
                result = select(state["graph"], self.config)
            return {"current_step": "select_counts", "result": result, "completed_steps": ["select_counts"]}
        except BcvError as e:
            logger.error(f"Selection failed: {e}")
            return {"current_step": "select_counts", "error_log": [f"select_counts: {e}"]}

    def refit_labels(self, state: DatasetState) -> Dict[str, Any]:
        """Step 3: Labels at the selected pair from the fully observed matrix."""
        try:
            result = state["result"]
            fitted = refit(state["graph"], result.K1hat, result.K2hat, self.config)
            return {"current_step": "refit_labels", "refit": fitted, "completed_steps": ["refit_labels"]}
        except BcvError as e:
            logger.error(f"Refit failed: {e}")
            return {"current_step": "refit_labels", "error_log": [f"refit_labels: {e}"]}

    def compare_metadata(self, state: DatasetState) -> Dict[str, Any]:
        """Step 4: ARI and matched agreement of side-1 labels against metadata."""
        path = state.get("metadata_path")
        if not path:
            return {"current_step": "compare_metadata", "comparison": {}}
        try:
            graph, fitted = state["graph"], state["refit"]
            reference, categories = load_metadata(
                path, graph.n1, state.get("id_column", "id"), state.get("label_column", "party"),
                state.get("one_indexed", True),
            )
            agreement = label_agreement(fitted.labels1, reference)
            comparison = {
                "ari": adjusted_rand_index(fitted.labels1, reference),
                "agreement": agreement,
                "consistent": int(round(agreement * graph.n1)),
                "n": graph.n1,
                "categories": categories,
                "reference": reference,
            }
            logger.info(f"Side-1 ARI vs metadata: {comparison['ari']:.3f}, {comparison['consistent']}/{graph.n1} consistent")
            return {"current_step": "compare_metadata", "comparison": comparison, "completed_steps": ["compare_metadata"]}
        except (BcvError, OSError) as e:
            logger.error(f"Metadata comparison failed: {e}")
            return {"current_step": "compare_metadata", "comparison": {}, "error_log": [f"compare_metadata: {e}"]}

    def export_results(self, state: DatasetState) -> Dict[str, Any]:
        """Step 5: Surface, slice and label CSVs."""
        output = state.get("output")
        if not output:
            return {"current_step": "export_results", "outputs": {}}
        try:
            out = Path(output)
            graph, fitted = state["graph"], state["refit"]
            surface_path, slice_path = emit_heatmap(state["result"], out / "surface.csv")
            reference = (state.get("comparison") or {}).get("reference")
            outputs = {
                "surface": str(surface_path),
                "slice": str(slice_path),
                "labels1": str(write_labels(out / "labels_side1.csv", fitted.labels1, graph.names1, reference)),
                "labels2": str(write_labels(out / "labels_side2.csv", fitted.labels2, graph.names2)),
            }
            return {"current_step": "export_results", "outputs": outputs, "completed_steps": ["export_results"]}
        except (BcvError, OSError) as e:
            logger.error(f"Export failed: {e}")
            return {"current_step": "export_results", "outputs": {}, "error_log": [f"export_results: {e}"]}


@dataclass
class DatasetReport:
    result: Optional[SelectionResult]
    refit: Optional[Refit]
    graph: Any
    comparison: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def run_dataset(
    source: str,
    config: Optional[BcvConfig] = None,
    output: Optional[str] = None,
    metadata_path: Optional[str] = None,
    id_column: str = "id",
    label_column: str = "party",
    one_indexed: bool = True,
    grid: Optional[tuple] = None,
) -> DatasetReport:
    """Run BCV on an edge-list path or builtin id ("southern-women")."""
    workflow = DatasetWorkflow(config or BcvConfig())
    inputs = {
        "source": str(source),
        "one_indexed": one_indexed,
        "grid": grid,
        "metadata_path": metadata_path,
        "id_column": id_column,
        "label_column": label_column,
        "output": output,
        "graph": None,
        "result": None,
        "refit": None,
        "error_log": [],
        "completed_steps": [],
        "current_step": "start",
    }
    state = invoke_graph(workflow.workflow, inputs)
    return DatasetReport(
        result=state.get("result"),
        refit=state.get("refit"),
        graph=state.get("graph"),
        comparison=state.get("comparison") or {},
        outputs=state.get("outputs") or {},
        errors=list(state.get("error_log") or []),
    )
