#!/usr/bin/env python3
"""Run every control method on one scenario and print a comparison table.

Covers the two non-learning baselines (fixed-time, actuated) and the five
learning methods (fedavg, cluster, fomo, decentralized, centralized) with
a shared seed and schedule, so the numbers are directly comparable.  Each
run writes its full artifact set under --out; the table at the end ranks
methods by final evaluation travel time.

Typical use:

    python3 scripts/run_grid3x3_suite.py --seed 0 --out runs/suite
    python3 scripts/run_grid3x3_suite.py --scenario grid3x3-heavy --episodes 40
"""

from __future__ import annotations

import argparse
from pathlib import Path

from hfrl.experiment import ExperimentConfig, run_experiment

BASELINES = ("fixed", "actuated")
LEARNERS = ("fedavg", "cluster", "fomo", "decentralized", "centralized")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="grid3x3")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--episodes", type=int, default=20)
    parser.add_argument("--steps", type=int, default=600, help="steps per episode")
    parser.add_argument("--round-interval", type=int, default=300)
    parser.add_argument("--out", type=Path, default=Path("runs/suite"))
    parser.add_argument("--methods", nargs="*", default=list(BASELINES + LEARNERS))
    args = parser.parse_args()

    rows = []
    for method in args.methods:
        episodes = 1 if method in BASELINES else args.episodes
        cfg = ExperimentConfig(
            name=f"suite-{args.scenario}",
            method=method,
            scenario=args.scenario,
            seed=args.seed,
            episodes=episodes,
            steps_per_episode=args.steps,
            round_interval=args.round_interval,
            eval_every=5,
            eval_episodes=1,
        )
        out_dir = args.out / f"{method}-s{args.seed}"
        print(f"running {method} ({episodes} episodes) -> {out_dir}")
        result = run_experiment(cfg, out_dir=out_dir)
        final = result.eval_records[-1]
        rows.append(
            (
                method,
                final["mean_travel_s"],
                final["mean_wait_s"],
                final["mean_reward"],
                result.comm.total_bytes,
            )
        )

    rows.sort(key=lambda r: r[1])
    print()
    print(f"{'method':<14} {'travel s':>9} {'wait s':>8} {'reward':>9} {'comm bytes':>13}")
    print("-" * 58)
    for method, travel, wait, reward, comm in rows:
        print(f"{method:<14} {travel:>9.2f} {wait:>8.2f} {reward:>+9.4f} {comm:>13,}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
