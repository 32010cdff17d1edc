import logging
import os
from pathlib import Path
from typing import List, Optional

import typer
from dotenv import load_dotenv

from bcv.baselines import bimodularity_communities, projection_counts
from bcv.config import load_bcv_config, load_experiment_config
from bcv.datasets import load_dataset
from bcv.errors import BcvError, ConfigError
from bcv.reporting import emit_heatmap
from bcv.selection import grid_search, select as run_selection
from utils import configure_logging
from workflow.dataset_pipeline import run_dataset
from workflow.simulation_pipeline import run_experiment

logger = logging.getLogger(__name__)

app = typer.Typer(
    help="Bipartite cross-validation: choose the community counts on both sides of a bipartite network.",
    no_args_is_help=True,
)


def _default_output(output: Optional[Path]) -> Optional[Path]:
    if output is not None:
        return output
    env = os.environ.get("BCV_OUTPUT_DIR")
    return Path(env) if env else None


def _patience(value: Optional[str]) -> Optional[int | float]:
    if value is None:
        return None
    if value.lower() in ("inf", "infinity", "none"):
        return float("inf")
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"patience must be an integer or 'inf', got {value!r}") from None


def _grid(value: Optional[str]) -> Optional[tuple[int, int]]:
    if not value:
        return None
    try:
        K1, K2 = (int(x) for x in value.split(","))
    except ValueError:
        raise ConfigError(f"--grid expects K1,K2, got {value!r}") from None
    return K1, K2


def _fail(error: Exception) -> None:
    typer.echo(f"Error: {error}", err=True)
    raise typer.Exit(code=1)


def _bcv_overrides(**flags) -> dict:
    # infinite patience travels as float("inf"); None means the flag was not given
    flags["patience"] = _patience(flags.get("patience"))
    return flags


def _load_bcv(config: Optional[Path], **flags):
    return load_bcv_config(config, _bcv_overrides(**flags))


@app.command()
def simulate(
    config: Optional[Path] = typer.Option(None, "--config", help="Experiment JSON; overrides flags"),
    setting: Optional[str] = typer.Option(None, help="balanced-1|balanced-2|balanced-3|poly-1|poly-2|custom"),
    r: Optional[float] = typer.Option(None, help="Sparsity scale, B = r * B0"),
    size: Optional[List[int]] = typer.Option(None, "--size", help="n0 (balanced growth) or n1 (poly); repeatable"),
    balance: Optional[str] = typer.Option(None, help="balanced|unbalanced"),
    reps: Optional[int] = typer.Option(None, help="Replications per size"),
    method: Optional[List[str]] = typer.Option(None, "--method", help="bcv|projection|bimodularity; repeatable"),
    seed: Optional[int] = typer.Option(None, help="Master seed"),
    workers: Optional[int] = typer.Option(None, help="Concurrent replications"),
    folds: Optional[int] = typer.Option(None, help="K-fold count"),
    C: Optional[float] = typer.Option(None, "--C", help="Penalty constant"),
    patience: Optional[str] = typer.Option(None, help="Frontier patience (integer or 'inf')"),
    output: Optional[Path] = typer.Option(None, help="Output directory"),
):
    """Run a simulation experiment and write table.csv, replications.csv and manifest.json."""
    try:
        bcv_flags = _bcv_overrides(folds=folds, C=C, patience=patience)
        experiment = load_experiment_config(
            config,
            {
                "setting": setting,
                "r": r,
                "sizes": size or None,
                "balance": balance,
                "reps": reps,
                "methods": method or None,
                "seed": seed,
                "workers": workers,
            },
            bcv_flags,
        )
        out = _default_output(output)
        record = run_experiment(experiment, str(out) if out else None)
    except BcvError as e:
        _fail(e)
    for row in record.table:
        typer.echo(
            f"{row['setting']} {row['balance']} r={row['r']} size={row['size']} {row['method']}: "
            f"({row['rate1']:.2f}, {row['rate2']:.2f}) over {row['reps']} reps, {row['failed']} failed"
        )


@app.command("select")
def select_command(
    source: str = typer.Argument(..., help="Edge-list path or builtin id (southern-women)"),
    config: Optional[Path] = typer.Option(None, "--config", help="JSON config; overrides flags"),
    mode: Optional[str] = typer.Option(None, help="kfold|bernoulli"),
    folds: Optional[int] = typer.Option(None),
    w: Optional[float] = typer.Option(None, help="Training proportion (bernoulli)"),
    replications: Optional[int] = typer.Option(None, help="Bernoulli split count"),
    repeats: Optional[int] = typer.Option(None, help="Fresh K-fold plans"),
    C: Optional[float] = typer.Option(None, "--C"),
    penalty_form: Optional[str] = typer.Option(None, help="sqrt-min|log"),
    patience: Optional[str] = typer.Option(None, help="Integer or 'inf'"),
    restarts: Optional[int] = typer.Option(None),
    seed: Optional[int] = typer.Option(None),
    max_frontier: Optional[int] = typer.Option(None),
    d_rule: Optional[str] = typer.Option(None, help="'product' or CSV with K1,K2,d"),
    workers: Optional[int] = typer.Option(None),
    grid: Optional[str] = typer.Option(None, help="Evaluate the full K1,K2 grid instead of the frontier"),
    metadata: Optional[Path] = typer.Option(None, help="Side-1 metadata CSV for ARI"),
    id_column: str = typer.Option("id"),
    label_column: str = typer.Option("party"),
    zero_indexed: bool = typer.Option(False, help="Edge-list indices start at 0"),
    output: Optional[Path] = typer.Option(None, help="Output directory"),
):
    """Select (K1, K2) for one dataset and export surface and labels."""
    try:
        bcv_config = _load_bcv(
            config,
            mode=mode,
            folds=folds,
            w=w,
            replications=replications,
            repeats=repeats,
            C=C,
            penalty_form=penalty_form,
            patience=patience,
            restarts=restarts,
            seed=seed,
            max_frontier=max_frontier,
            d_rule=d_rule,
            workers=workers,
        )
        out = _default_output(output)
        report = run_dataset(
            source,
            bcv_config,
            output=str(out) if out else None,
            metadata_path=str(metadata) if metadata else None,
            id_column=id_column,
            label_column=label_column,
            one_indexed=not zero_indexed,
            grid=_grid(grid),
        )
    except BcvError as e:
        _fail(e)
    if not report.ok:
        _fail(BcvError("; ".join(report.errors)))

    result = report.result
    typer.echo(f"Selected (K1, K2) = ({result.K1hat}, {result.K2hat}); lambda={result.lam:.4g}, rho_hat={result.rho_hat:.4g}")
    if report.comparison:
        c = report.comparison
        typer.echo(f"Side-1 ARI vs metadata: {c['ari']:.3f}; {c['consistent']} of {c['n']} consistent")
    for name, path in report.outputs.items():
        typer.echo(f"  {name}: {path}")


@app.command()
def baseline(
    source: str = typer.Argument(..., help="Edge-list path or builtin id"),
    method: str = typer.Option("bimodularity", help="projection|bimodularity"),
    seed: int = typer.Option(0),
    zero_indexed: bool = typer.Option(False),
):
    """Per-side community counts from a baseline method."""
    try:
        graph = load_dataset(source, one_indexed=not zero_indexed)
        if method == "projection":
            K1, K2 = projection_counts(graph, seed)
        elif method == "bimodularity":
            labels1, labels2 = bimodularity_communities(graph, seed=seed)
            K1, K2 = labels1.num_nonempty(), labels2.num_nonempty()
        else:
            raise ConfigError(f"unknown baseline {method!r}")
    except BcvError as e:
        _fail(e)
    typer.echo(f"{method}: (K1, K2) = ({K1}, {K2})")


@app.command()
def surface(
    source: str = typer.Argument(..., help="Edge-list path or builtin id"),
    output: Path = typer.Option(Path("surface.csv"), help="Surface CSV path; the slice goes next to it"),
    config: Optional[Path] = typer.Option(None, "--config"),
    seed: Optional[int] = typer.Option(None),
    patience: Optional[str] = typer.Option(None),
    grid: Optional[str] = typer.Option(None, help="K1,K2 grid instead of the frontier"),
    k1: Optional[int] = typer.Option(None, "--k1", help="K1 of the slice (default: selected K1)"),
    zero_indexed: bool = typer.Option(False),
):
    """Write the loss surface and a fixed-K1 slice as CSV."""
    try:
        bcv_config = _load_bcv(config, seed=seed, patience=patience)
        graph = load_dataset(source, one_indexed=not zero_indexed)
        box = _grid(grid)
        result = grid_search(graph, bcv_config, *box) if box else run_selection(graph, bcv_config)
        surface_path, slice_path = emit_heatmap(result, output, k1)
    except BcvError as e:
        _fail(e)
    typer.echo(f"Selected ({result.K1hat}, {result.K2hat}); wrote {surface_path} and {slice_path}")


def main():
    load_dotenv(override=True)
    configure_logging()
    app()


if __name__ == "__main__":
    main()
