#!/usr/bin/env python3
"""Run a small synthetic coevolution end to end and export the plot data.

Creates a run directory with config, per-generation snapshots, a manifest,
the selected task force, and one CSV per export kind. Everything is driven
through the same CLI entry point a user would call.
"""

import argparse
import sys
from pathlib import Path

from acdc.cli import EXPORT_KINDS, main as cli_main
from acdc.config import RunConfig, serialize_config


def build_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        generations=args.generations,
        active_models=16,
        offspring_per_gen=8,
        active_tasks=100,
        task_interval=5,
        taskforce_size=8,
        run_seed=args.seed,
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--generations", type=int, default=30)
    parser.add_argument("--out", type=Path, default=Path("demo_run"))
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    config_path = args.out / "config.yaml"
    config_path.write_text(serialize_config(build_config(args)))

    rc = cli_main(["run", "--config", str(config_path),
                   "--out", str(args.out)])
    if rc != 0:
        return rc

    manifest = args.out / "manifest.json"
    for kind in EXPORT_KINDS:
        rc = cli_main(["export", "--manifest", str(manifest),
                       "--kind", kind, "--out", str(args.out / f"{kind}.csv")])
        if rc != 0:
            return rc
    print(f"run directory: {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
