"""
Tests for the BipartiteCV MCP server tools
"""

import pytest

from mcp_servers.bcv_server import (
    count_baseline_communities,
    get_server_status,
    mcp,
    select_communities,
    simulate_setting,
)

TOY_EDGES = "1 1\n1 2\n2 1\n2 2\n3 3\n3 4\n4 3\n4 4\n"


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.txt"
    path.write_text(TOY_EDGES)
    return str(path)


def test_server_registration():
    assert mcp.name == "BipartiteCV"


async def test_server_status():
    status = await get_server_status()
    assert status["success"] is True
    assert "southern-women" in status["builtin_datasets"]
    assert "bcv" in status["methods"]
    assert "poly-2" in status["settings"]


async def test_select_communities_on_toy(toy_file):
    result = await select_communities(toy_file, folds=16)
    assert result["success"] is True, result["error"]
    assert (result["K1hat"], result["K2hat"]) == (2, 2)
    assert (result["n1"], result["n2"]) == (4, 4)
    assert {"K1", "K2", "mse", "penalty", "total"} <= set(result["surface"][0])


async def test_select_communities_on_grid(toy_file):
    result = await select_communities(toy_file, folds=16, grid_K1=2, grid_K2=3)
    assert result["success"] is True
    assert len(result["surface"]) == 6


async def test_select_communities_reports_errors(tmp_path):
    result = await select_communities(str(tmp_path / "missing.txt"))
    assert result["success"] is False
    assert "Selection failed" in result["error"]

    result = await select_communities("southern-women", folds=1)
    assert result["success"] is False


async def test_count_baseline_communities(toy_file):
    result = await count_baseline_communities(toy_file, method="bimodularity")
    assert result["success"] is True
    assert (result["K1"], result["K2"]) == (2, 2)

    result = await count_baseline_communities(toy_file, method="projection")
    assert result["success"] is True
    assert (result["K1"], result["K2"]) == (2, 2)

    result = await count_baseline_communities(toy_file, method="spectral")
    assert result["success"] is False
    assert "Unsupported method" in result["error"]


async def test_simulate_setting():
    result = await simulate_setting("balanced-1", r=0.5, size=6, reps=1, seed=3)
    assert result["success"] is True, result["error"]
    assert result["truth"] == [3, 3]
    assert len(result["table"]) == 1
    assert result["table"][0]["reps"] + result["table"][0]["failed"] == 1


async def test_simulate_setting_rejects_unknown_setting():
    result = await simulate_setting("balanced-7", r=0.05, size=10)
    assert result["success"] is False
    assert "Simulation failed" in result["error"]
