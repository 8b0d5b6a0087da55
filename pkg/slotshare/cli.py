"""CLI entrypoint for slotshare."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import typer

from . import scenarios as scenarios_module
from .config import ExperimentConfig, load_config
from .core import run_experiment
from .exceptions import ChannelError, ConfigError, NumericError, PopulationError, SlotShareError
from .io import emit_metrics, load_metrics
from .report import RunSummary

app = typer.Typer(help="slotshare multichannel random-access simulator")


@app.command()
def run(
    config: str = typer.Option(..., "--config", help="TOML or JSON experiment config"),
    seed: Optional[int] = typer.Option(None, help="Master seed override"),
    out: Optional[str] = typer.Option(None, help="Output directory override"),
    scenario: Optional[str] = typer.Option(None, help="fixed, dynamic or rate"),
    baseline: Optional[str] = typer.Option(None, help="none, max_rate, pf or aloha"),
    sequential: bool = typer.Option(False, "--sequential", help="Step agents on one thread"),
    log_level: str = typer.Option("INFO", "--log-level"),
) -> None:
    """Run an experiment and write its metric tables."""

    logging.basicConfig(level=log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config).with_overrides(
            seed=seed,
            out_dir=out,
            scenario=scenario,
            baseline=baseline,
            workers=1 if sequential else None,
        )
    except ConfigError as exc:
        typer.echo(f"Config error: {exc}", err=True)
        raise typer.Exit(code=2)

    # trace and snapshot problems only surface once the run starts
    try:
        log, summary = run_experiment(cfg)
    except (ConfigError, PopulationError, ChannelError) as exc:
        typer.echo(f"Config error: {exc}", err=True)
        raise typer.Exit(code=2)
    except OSError as exc:
        typer.echo(f"Config error: cannot read {exc.filename}: {exc.strerror}", err=True)
        raise typer.Exit(code=2)
    except NumericError as exc:
        typer.echo(f"Numeric failure: {exc}", err=True)
        raise typer.Exit(code=3)

    written = emit_metrics(log, cfg.out_dir)
    summary.to_json(Path(cfg.out_dir) / "summary.json")
    summary.to_markdown(Path(cfg.out_dir) / "summary.md")
    typer.echo(f"Metrics written to {cfg.out_dir} ({', '.join(p.name for p in written.values())})")
    typer.echo(f"sum_throughput={summary.sum_throughput:.6g} collision_rate={summary.collision_rate:.4f}")


@app.command("init-config")
def init_config(
    out: str = typer.Option(..., "--out"),
    preset: Optional[str] = typer.Option(None, help="Start from a built-in scenario"),
    n_rbs: Optional[int] = typer.Option(None, "--n-rbs"),
) -> None:
    """Write a config template."""

    try:
        if preset is not None:
            cfg = scenarios_module.get(preset).with_overrides(n_rbs=n_rbs)
        else:
            cfg = ExperimentConfig(n_rbs=n_rbs or 2)
    except KeyError as exc:
        typer.echo(str(exc), err=True)
        raise typer.Exit(code=2)
    except ConfigError as exc:
        typer.echo(f"Config error: {exc}", err=True)
        raise typer.Exit(code=2)
    cfg.to_file(out)
    typer.echo(f"Config written to {out}")


@app.command()
def scenarios() -> None:
    """List built-in scenarios."""

    for name, description in scenarios_module.DESCRIPTIONS.items():
        typer.echo(f"{name}: {description}")


@app.command()
def summarize(directory: str) -> None:
    """Print the summary of a finished run directory."""

    json_path = Path(directory) / "summary.json"
    try:
        log = load_metrics(directory)
    except SlotShareError as exc:
        typer.echo(str(exc), err=True)
        raise typer.Exit(code=1)
    if json_path.exists():
        summary = RunSummary.from_json(json_path)
    else:
        row = log.summary.iloc[0]
        summary = RunSummary(
            sum_throughput=float(row["sum_throughput"]),
            weighted_objective=float(row["weighted_objective"]),
            collision_rate=float(row["collision_rate"]),
            seed=int(row["seed"]),
            n_users=len(log.users),
        )
    typer.echo(summary._as_markdown())


if __name__ == "__main__":
    app()
