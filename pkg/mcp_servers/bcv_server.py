"""
Bipartite CV MCP Server
Exposes community-count selection, simulation settings and baseline counts
as MCP tools. Every tool returns a dict with "success" and "error" keys.
"""

import asyncio
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bcv import __version__  # noqa: E402
from bcv.baselines import bimodularity_communities, projection_counts  # noqa: E402
from bcv.config import METHODS, SETTING_IDS, load_bcv_config, load_experiment_config  # noqa: E402
from bcv.datasets import BUILTIN_DATASETS, load_dataset  # noqa: E402
from bcv.reporting import surface_frame  # noqa: E402
from bcv.selection import grid_search, select  # noqa: E402
from utils import configure_logging  # noqa: E402
from workflow.simulation_pipeline import run_experiment  # noqa: E402

logger = logging.getLogger(__name__)

mcp = FastMCP(
    "BipartiteCV",
    instructions="Selects the numbers of communities on both sides of a bipartite network by cross-validation, "
    "and runs simulation settings and baseline community counts.",
    host="localhost",
    port=8010,
)


@mcp.tool()
async def select_communities(
    source: str,
    config_path: Optional[str] = None,
    folds: Optional[int] = None,
    repeats: Optional[int] = None,
    C: Optional[float] = None,
    patience: Optional[int] = None,
    seed: Optional[int] = None,
    max_frontier: Optional[int] = None,
    grid_K1: Optional[int] = None,
    grid_K2: Optional[int] = None,
) -> Dict[str, Any]:
    """
    Select (K1, K2) for an edge-list file or builtin dataset.

    Args:
        source (str): edge-list path (1-indexed "i j" lines) or "southern-women"
        config_path (str, optional): JSON config whose values override the arguments
        folds, repeats, C, patience, seed, max_frontier: selection settings;
            repeats defaults to enough K-fold plans for small graphs
        grid_K1, grid_K2 (int, optional): evaluate the full grid instead of the frontier

    Returns:
        Dict with the selected pair, penalty factor, density and the loss surface
    """
    result: Dict[str, Any] = {"success": False, "error": "", "source": source}
    try:
        config = load_bcv_config(
            config_path,
            {
                "folds": folds,
                "repeats": repeats,
                "C": C,
                "patience": patience,
                "seed": seed,
                "max_frontier": max_frontier,
            },
        )
        graph = await asyncio.to_thread(load_dataset, source)
        if grid_K1 and grid_K2:
            selection = await asyncio.to_thread(grid_search, graph, config, grid_K1, grid_K2)
        else:
            selection = await asyncio.to_thread(select, graph, config)
        result.update(
            {
                "success": True,
                "K1hat": selection.K1hat,
                "K2hat": selection.K2hat,
                "lambda": selection.lam,
                "rho_hat": selection.rho_hat,
                "n1": graph.n1,
                "n2": graph.n2,
                "frontier_steps": len(selection.trace),
                "surface": surface_frame(selection).to_dict(orient="records"),
            }
        )
        logger.info(f"Selected ({selection.K1hat}, {selection.K2hat}) for {source}")
    except Exception as e:
        result["error"] = f"Selection failed: {e}"
        logger.error(f"Selection failed for {source}: {e}")
    return result


@mcp.tool()
async def simulate_setting(
    setting: str,
    r: float,
    size: int,
    reps: int = 5,
    balance: str = "balanced",
    methods: Optional[List[str]] = None,
    seed: int = 0,
) -> Dict[str, Any]:
    """
    Run a simulation setting at one size and report per-side recovery rates.

    Args:
        setting (str): balanced-1, balanced-2, balanced-3, poly-1 or poly-2
        r (float): sparsity scale, B = r * B0
        size (int): n0 for balanced growth, n1 for polynomial growth
        reps (int): number of replications
        balance (str): "balanced" or "unbalanced" community proportions
        methods (list, optional): subset of bcv, projection, bimodularity
        seed (int): master seed

    Returns:
        Dict with one table row per method
    """
    result: Dict[str, Any] = {"success": False, "error": "", "setting": setting}
    try:
        config = load_experiment_config(
            overrides={
                "setting": setting,
                "r": r,
                "sizes": [size],
                "reps": reps,
                "balance": balance,
                "methods": methods or ["bcv"],
                "seed": seed,
            }
        )
        record = await asyncio.to_thread(run_experiment, config)
        result.update({"success": True, "truth": list(record.truth), "table": record.table})
    except Exception as e:
        result["error"] = f"Simulation failed: {e}"
        logger.error(f"Simulation of {setting} failed: {e}")
    return result


@mcp.tool()
async def count_baseline_communities(source: str, method: str = "bimodularity", seed: int = 0) -> Dict[str, Any]:
    """
    Per-side community counts from a baseline method.

    Args:
        source (str): edge-list path or builtin dataset id
        method (str): "projection" or "bimodularity"
        seed (int): random seed

    Returns:
        Dict with K1 and K2 counts
    """
    result: Dict[str, Any] = {"success": False, "error": "", "source": source, "method": method}
    try:
        graph = await asyncio.to_thread(load_dataset, source)
        if method == "projection":
            K1, K2 = await asyncio.to_thread(projection_counts, graph, seed)
        elif method == "bimodularity":
            labels1, labels2 = await asyncio.to_thread(bimodularity_communities, graph, seed=seed)
            K1, K2 = labels1.num_nonempty(), labels2.num_nonempty()
        else:
            result["error"] = f"Unsupported method: {method}"
            return result
        result.update({"success": True, "K1": K1, "K2": K2})
    except Exception as e:
        result["error"] = f"Baseline failed: {e}"
        logger.error(f"{method} baseline failed for {source}: {e}")
    return result


@mcp.tool()
async def get_server_status() -> Dict[str, Any]:
    """Server version, builtin datasets, settings and methods."""
    return {
        "success": True,
        "error": "",
        "server": "BipartiteCV",
        "version": __version__,
        "builtin_datasets": list(BUILTIN_DATASETS),
        "settings": list(SETTING_IDS),
        "methods": list(METHODS),
        "timestamp": datetime.now().isoformat(),
    }


if __name__ == "__main__":
    load_dotenv(override=True)
    configure_logging()
    mcp.run(transport="stdio")
