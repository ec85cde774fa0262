"""Command-line front end: run/resume, task-force selection, coverage
evaluation, lineage inspection, and CSV plot-data export.

A run directory holds the config, a manifest, per-generation snapshots,
and the provider transcript log. Exit codes: 0 success, 1 usage error,
2 runtime failure.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import engine, metrics, persistence
from .config import RunConfig, config_hash, parse_config, serialize_config
from .engine import ArchiveState
from .errors import AcdcError, UnknownKind
from .providers import TranscriptLog

logger = logging.getLogger(__name__)

MANIFEST_VERSION = "1"
EXPORT_KINDS = ("coverage_over_generations", "new_models_per_gen",
                "vendi_over_epochs", "adaptation_mix")


# ---------------------------------------------------------------------------
# run directory plumbing


def _snapshot_path(run_dir: Path, generation: int) -> Path:
    return run_dir / "snapshots" / f"gen_{generation:05d}.snap"


def _write_manifest(run_dir: Path, config: RunConfig,
                    snapshot_gens: list[int]) -> None:
    manifest = {
        "version": MANIFEST_VERSION,
        "config_path": "config.yaml",
        "config_hash": config_hash(config),
        "snapshots": {str(g): str(Path("snapshots") / f"gen_{g:05d}.snap")
                      for g in snapshot_gens},
        "transcripts_path": "transcripts.jsonl",
    }
    persistence.write_manifest(run_dir / "manifest.json", manifest)


def load_run(manifest_path: Path) -> tuple[dict, RunConfig, Path]:
    run_dir = manifest_path.parent
    manifest = persistence.read_manifest(manifest_path)
    config = parse_config(run_dir / manifest["config_path"])
    if config_hash(config) != manifest["config_hash"]:
        raise AcdcError("stored config does not match manifest hash")
    for rel in manifest["snapshots"].values():
        if not (run_dir / rel).exists():
            raise AcdcError(f"manifest references missing snapshot {rel}")
    return manifest, config, run_dir


def load_latest_state(manifest: dict, run_dir: Path) -> ArchiveState:
    gens = sorted(int(g) for g in manifest["snapshots"])
    if not gens:
        raise AcdcError("manifest has no snapshots")
    blob = (run_dir / manifest["snapshots"][str(gens[-1])]).read_bytes()
    return engine.restore(blob)


def _save_snapshot(run_dir: Path, state: ArchiveState) -> None:
    persistence.atomic_write_bytes(_snapshot_path(run_dir, state.generation),
                                   engine.snapshot(state))


def _run_to_completion(config: RunConfig, run_dir: Path,
                       state: ArchiveState | None = None) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "snapshots").mkdir(exist_ok=True)
    persistence.atomic_write_text(run_dir / "config.yaml",
                                  serialize_config(config))
    transcripts = TranscriptLog(run_dir / "transcripts.jsonl")
    providers = engine.make_providers(config, transcripts=transcripts)
    saved: list[int] = []

    def checkpoint(s: ArchiveState) -> None:
        _save_snapshot(run_dir, s)
        saved.append(s.generation)
        _write_manifest(run_dir, config, saved)

    if state is None:
        state, task_force = engine.run(config, providers,
                                       snapshot_callback=checkpoint)
    else:
        saved.extend(g for g in range(state.generation + 1)
                     if _snapshot_path(run_dir, g).exists())
        while state.generation < config.generations:
            state = engine.run_generation(state, config, providers)
            checkpoint(state)
        task_force = engine.select_final_task_force(state, config, providers)

    persistence.atomic_write_text(run_dir / "taskforce.json", json.dumps({
        "member_ids": task_force.member_ids,
        "selection_strategy": task_force.selection_strategy,
        "achieved_coverage": task_force.achieved_coverage,
    }, indent=2, sort_keys=True))
    click.echo(f"run complete: generation {state.generation}, "
               f"task force {task_force.member_ids} "
               f"(coverage {task_force.achieved_coverage:.4f})")


# ---------------------------------------------------------------------------
# CSV export


def export_plot_data(state: ArchiveState, kind: str) -> str:
    """Render one plot-data table as RFC-4180 CSV with a single header row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    if kind == "coverage_over_generations":
        writer.writerow(["generation", "archive_coverage"])
        for s in state.gen_stats:
            writer.writerow([s.generation, repr(s.archive_coverage)])
    elif kind == "new_models_per_gen":
        writer.writerow(["generation", "new_models"])
        for s in state.gen_stats:
            writer.writerow([s.generation, s.new_models])
    elif kind == "vendi_over_epochs":
        writer.writerow(["generation", "epoch", "vendi"])
        for s in state.epoch_stats:
            writer.writerow([s.generation, s.epoch, repr(s.vendi)])
    elif kind == "adaptation_mix":
        writer.writerow(["generation", "epoch", "harder", "easier", "novel"])
        for s in state.epoch_stats:
            writer.writerow([s.generation, s.epoch, s.accepted_harder,
                             s.accepted_easier, s.accepted_novel])
    else:
        raise UnknownKind(f"unknown export kind {kind!r}")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


@click.group()
def cli() -> None:
    """Coevolution engine for model archives and synthetic task archives."""


@cli.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None,
              help="Override run_seed from the config.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default=None, help="Run directory (default: run_<seed>).")
def cmd_run(config_path: str, seed: int | None, out_dir: str | None) -> None:
    """Start a run from a config file."""
    config = parse_config(config_path)
    if seed is not None:
        config.run_seed = seed
    config.validate()
    run_dir = Path(out_dir) if out_dir else Path(f"run_{config.run_seed}")
    _run_to_completion(config, run_dir)


@cli.command("resume")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
def cmd_resume(manifest_path: str) -> None:
    """Continue an interrupted run from its latest snapshot."""
    manifest, config, run_dir = load_run(Path(manifest_path))
    state = load_latest_state(manifest, run_dir)
    if state.generation >= config.generations:
        click.echo("run already complete; nothing to resume")
        return
    _run_to_completion(config, run_dir, state=state)


@cli.command("select-taskforce")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n", required=True, type=int)
@click.option("--strategy", required=True,
              type=click.Choice(["coverage", "fitness", "random"]))
def cmd_select_taskforce(manifest_path: str, n: int, strategy: str) -> None:
    """Select a task force from the historical archive of the latest snapshot."""
    manifest, config, run_dir = load_run(Path(manifest_path))
    state = load_latest_state(manifest, run_dir)
    providers = engine.make_providers(config)
    matrix = engine.historical_response_matrix(state, providers)
    rng = engine.derived_rng(state.run_seed, state.generation + 1, "taskforce")
    task_force = metrics.select_task_force(matrix, n, strategy, rng)
    click.echo(json.dumps({
        "member_ids": task_force.member_ids,
        "selection_strategy": task_force.selection_strategy,
        "achieved_coverage": task_force.achieved_coverage,
    }, indent=2, sort_keys=True))


@cli.command("eval-coverage")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--models", required=True,
              help="Comma-separated genome ids to evaluate.")
@click.option("--holdout", "holdout_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON Lines task file; defaults to the global task archive.")
def cmd_eval_coverage(manifest_path: str, models: str,
                      holdout_path: str | None) -> None:
    """Coverage of the given models over the global archive or a holdout set."""
    manifest, config, run_dir = load_run(Path(manifest_path))
    state = load_latest_state(manifest, run_dir)
    providers = engine.make_providers(config)
    ids = [m.strip() for m in models.split(",") if m.strip()]
    if not ids:
        raise click.UsageError("--models must name at least one genome id")
    missing = [m for m in ids if m not in state.genome_store]
    if missing:
        raise AcdcError(f"unknown genome ids: {missing}")
    if holdout_path:
        with open(holdout_path, encoding="utf-8") as fh:
            tasks = [engine._task_from_json(json.loads(line))
                     for line in fh if line.strip()]
    else:
        tasks = state.task_archives.global_order
    rows = []
    for gid in ids:
        per_task = engine.evaluate_genome(state.genome_store[gid], tasks,
                                          providers)
        rows.append([1 if s == 1.0 else 0 for s in per_task])
    matrix = metrics.ResponseMatrix(correct=np.array(rows, dtype=np.int8),
                                    model_ids=ids,
                                    question_ids=[t.id for t in tasks])
    click.echo(json.dumps({
        "models": ids,
        "n_tasks": len(tasks),
        "coverage": metrics.coverage(matrix),
        "per_model": {gid: float(matrix.row(gid).mean()) for gid in ids},
    }, indent=2, sort_keys=True))


@cli.command("lineage")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_id", required=True)
def cmd_lineage(manifest_path: str, model_id: str) -> None:
    """Print a model's ancestry as an indented tree down to the seed genomes."""
    manifest, _config, run_dir = load_run(Path(manifest_path))
    state = load_latest_state(manifest, run_dir)
    if model_id not in state.lineage:
        raise AcdcError(f"unknown genome id {model_id!r}")

    def render(gid: str, depth: int, seen: set[str]) -> None:
        lin = state.lineage.get(gid)
        if lin is None or not lin.parents:
            click.echo(f"{'  ' * depth}{gid} (seed)")
            return
        weights = f" weights={tuple(round(w, 4) for w in lin.weights)}" \
            if lin.weights else ""
        click.echo(f"{'  ' * depth}{gid} <- {lin.operator}{weights}")
        if gid in seen:
            click.echo(f"{'  ' * (depth + 1)}...")
            return
        for parent in lin.parents:
            render(parent, depth + 1, seen | {gid})

    render(model_id, 0, set())


@cli.command("export")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", required=True, type=click.Choice(EXPORT_KINDS))
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False))
def cmd_export(manifest_path: str, kind: str, out_path: str) -> None:
    """Write one plot-data CSV regenerated from the latest snapshot."""
    manifest, _config, run_dir = load_run(Path(manifest_path))
    state = load_latest_state(manifest, run_dir)
    persistence.atomic_write_text(out_path, export_plot_data(state, kind))
    click.echo(f"wrote {kind} to {out_path}")


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping failures to the documented exit codes."""
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help and friends
        return 0 if exc.exit_code == 0 else 1
    except (click.UsageError, click.Abort) as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1
    except (AcdcError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
