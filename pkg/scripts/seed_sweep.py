#!/usr/bin/env python3
"""Sweep run seeds and compare the selected task force against the seed
population on held-out probe tasks.

For each seed the script runs the full coevolution, selects the
coverage-maximizing task force, and evaluates both the task force and the
initial seed genomes on fresh probes never shown during the run. It prints
one row per seed plus a summary line.
"""

import argparse
import sys
import time

import numpy as np

from acdc.config import RunConfig
from acdc.engine import (
    evaluate_genome,
    make_holdout_tasks,
    make_synthetic_providers,
    run,
    select_final_task_force,
)
from acdc.metrics import ResponseMatrix, coverage


def holdout_coverage(state, providers, member_ids, tasks) -> float:
    rows = []
    for gid in member_ids:
        per_task = evaluate_genome(state.genome_store[gid], tasks, providers)
        rows.append([1 if s == 1.0 else 0 for s in per_task])
    matrix = ResponseMatrix(correct=np.array(rows, dtype=np.int8),
                            model_ids=list(member_ids),
                            question_ids=[t.id for t in tasks])
    return coverage(matrix)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10,
                        help="Number of run seeds (0..N-1).")
    parser.add_argument("--generations", type=int, default=30)
    parser.add_argument("--holdout", type=int, default=200,
                        help="Number of held-out probe tasks.")
    args = parser.parse_args()

    wins = 0
    start = time.perf_counter()
    print(f"{'seed':>4}  {'taskforce':>9}  {'seeds':>7}  {'margin':>7}  influx")
    for seed in range(args.seeds):
        config = RunConfig(generations=args.generations, active_models=16,
                           offspring_per_gen=8, active_tasks=100,
                           task_interval=5, taskforce_size=8, run_seed=seed)
        providers = make_synthetic_providers(config)
        state, _ = run(config, providers)
        holdout = make_holdout_tasks(config, args.holdout)
        tf = select_final_task_force(state, config, providers)
        seed_ids = [f"seed{i}" for i in range(config.synthetic.n_seed_genomes)]
        tf_cov = holdout_coverage(state, providers, tf.member_ids, holdout)
        seed_cov = holdout_coverage(state, providers, seed_ids, holdout)
        influx_ok = all(s.new_models > 0 for s in state.gen_stats)
        wins += tf_cov > seed_cov
        print(f"{seed:>4}  {tf_cov:>9.3f}  {seed_cov:>7.3f}  "
              f"{tf_cov - seed_cov:>+7.3f}  {'ok' if influx_ok else 'STALLED'}")
    elapsed = time.perf_counter() - start
    print(f"\ntask force wins {wins}/{args.seeds} "
          f"({elapsed:.1f}s total)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
