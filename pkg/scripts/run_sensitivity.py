#!/usr/bin/env python3
"""Demand-sensitivity study: where do the parameter clusters land?

Runs the cluster method on each sensitivity scenario (uniform demand plus
three doubled-corridor variants) over several seeds, then reports how
often each pair of intersections shares a cluster at the final round.
The interesting signal is whether the directly loaded intersections end
up grouped together rather than with their unloaded neighbours.

    python3 scripts/run_sensitivity.py --seeds 5 --out runs/sensitivity
"""

from __future__ import annotations

import argparse
import itertools
import json
from collections import Counter
from pathlib import Path

from hfrl.experiment import ExperimentConfig, run_experiment

SCENARIOS = ("sensitivity1", "sensitivity2", "sensitivity3", "sensitivity4")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=5, help="number of seeds (0..n-1)")
    parser.add_argument("--episodes", type=int, default=20)
    parser.add_argument("--clusters", type=int, default=2)
    parser.add_argument("--out", type=Path, default=Path("runs/sensitivity"))
    parser.add_argument("--scenarios", nargs="*", default=list(SCENARIOS))
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    report: dict[str, dict] = {}
    for scenario in args.scenarios:
        pair_counts: Counter[tuple[str, str]] = Counter()
        final_labels = []
        for seed in range(args.seeds):
            cfg = ExperimentConfig(
                name=f"sens-{scenario}",
                method="cluster",
                scenario=scenario,
                seed=seed,
                episodes=args.episodes,
                steps_per_episode=600,
                round_interval=300,
                eval_every=5,
                eval_episodes=0,
                n_clusters=args.clusters,
            )
            result = run_experiment(cfg, out_dir=args.out / f"{scenario}-s{seed}")
            labels = result.round_records[-1]["cluster_labels"]
            final_labels.append(labels)
            for a, b in itertools.combinations(sorted(labels), 2):
                if labels[a] == labels[b]:
                    pair_counts[(a, b)] += 1

        co = {f"{a}+{b}": c for (a, b), c in sorted(pair_counts.items())}
        report[scenario] = {"final_labels": final_labels, "co_cluster_counts": co}

        print(f"\n{scenario}: pairs sharing a cluster at the final round "
              f"(out of {args.seeds} seeds)")
        top = sorted(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        for (a, b), count in top[:8]:
            print(f"  {a} + {b}: {count}/{args.seeds}")

    report_path = args.out / "sensitivity_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"\nfull report written to {report_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
