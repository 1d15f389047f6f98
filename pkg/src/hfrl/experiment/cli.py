"""Command-line entry points: run, analyze, compare.

``run`` executes one configured experiment and writes its artifact
directory.  ``analyze`` inspects a finished run: parameter similarity,
nearest neighbours, hierarchical grouping, and (for fomo runs) the
importance-weight affinity.  ``compare`` lines up several runs' headline
numbers and flags learning methods that failed to beat a fixed-time
baseline included in the comparison.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ..agents.checkpoint import load_model
from ..agents.networks import flatten_params
from ..analysis import (
    fomo_affinity,
    hierarchical_cluster,
    load_rounds,
    round_snapshot,
    similarity_heatmap_svg,
    similarity_matrix,
    top_k_similar,
)
from ..svgplot import line_chart
from .config import ConfigError, ExperimentConfig, load_config
from .runner import run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hfrl",
        description="Federated reinforcement learning for traffic signal control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment")
    run_p.add_argument("config", nargs="?", default=None, help="TOML config file (defaults apply if omitted)")
    run_p.add_argument("--config", dest="config_opt", default=None, help="TOML config file (same as the positional)")
    run_p.add_argument("--out", default=None, help="artifact directory (default: runs/<name>-<method>-s<seed>)")
    run_p.add_argument("--method", default=None, help="override the configured method")
    run_p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    run_p.add_argument("--episodes", type=int, default=None, help="override the episode count")
    run_p.add_argument("--scenario", default=None, help="override the scenario preset")
    run_p.add_argument("--name", default=None, help="override the experiment name")
    run_p.add_argument("--quiet", action="store_true", help="suppress progress lines")

    an_p = sub.add_parser("analyze", help="similarity and grouping analysis of a finished run")
    an_p.add_argument("run_dir", nargs="?", default=None, help="artifact directory produced by 'hfrl run'")
    an_p.add_argument("--run", dest="run_opt", default=None, help="artifact directory (same as the positional)")
    an_p.add_argument(
        "--rounds", default=None,
        help="comma-separated checkpoint rounds, e.g. 1,20,40 (default: latest)",
    )
    an_p.add_argument("--top-k", type=int, default=3, help="neighbours to list per agent")
    an_p.add_argument("--clusters", type=int, default=2, help="groups to cut the dendrogram into")
    an_p.add_argument("--standardize", action="store_true", help="z-score coordinates before cosine similarity")
    an_p.add_argument("--out", default=None, help="output directory (default: <run_dir>/analysis)")

    cmp_p = sub.add_parser("compare", help="tabulate several runs side by side")
    cmp_p.add_argument("run_dirs", nargs="+", help="artifact directories to compare")
    cmp_p.add_argument("--out", default=None, help="directory for comparison.csv and eval_curves.svg")
    return parser


# -- run --------------------------------------------------------------------


def _cmd_run(args: argparse.Namespace) -> int:
    config_path = args.config_opt or args.config
    if config_path is not None:
        config = load_config(config_path)
    else:
        config = ExperimentConfig()
    overrides = {}
    for key in ("method", "seed", "episodes", "scenario", "name"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if overrides:
        config = dataclasses.replace(config, **overrides)

    out = args.out or f"runs/{config.name}-{config.method}-s{config.seed}"
    echo = None if args.quiet else lambda line: print(line, flush=True)
    result = run_experiment(config, out_dir=out, echo=echo)

    print(f"run complete: {config.name} ({config.method}, scenario {config.scenario}, seed {config.seed})")
    if result.eval_records:
        final = result.eval_records[-1]
        print(
            f"final eval: reward {final['mean_reward']:+.4f}, "
            f"travel {final['mean_travel_s']:.1f} s, wait {final['mean_wait_s']:.1f} s"
        )
    print(f"communication: {result.comm.total_bytes:,} bytes over {config.episodes} episodes")
    print(f"artifacts: {result.out_dir}")
    return 0


# -- analyze ----------------------------------------------------------------


def _checkpoint_rounds(run_dir: Path) -> list[int]:
    ck = run_dir / "checkpoints"
    if not ck.is_dir():
        return []
    rounds = []
    for child in ck.iterdir():
        if child.is_dir() and child.name.startswith("round_"):
            try:
                rounds.append(int(child.name.split("_", 1)[1]))
            except ValueError:
                continue
    return sorted(rounds)


def _load_round_params(run_dir: Path, round_no: int) -> dict[str, np.ndarray]:
    ck_dir = run_dir / "checkpoints" / f"round_{round_no:03d}"
    params = {}
    for path in sorted(ck_dir.glob("*.bin")):
        model, _meta = load_model(path)
        params[path.stem] = flatten_params(model)
    if not params:
        raise FileNotFoundError(f"no checkpoints under {ck_dir}")
    return params


def _write_similarity_csv(path: Path, result) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent"] + result.names)
        for name, row in zip(result.names, result.matrix):
            writer.writerow([name] + [f"{v:.12g}" for v in row])


def _analyze_one_round(args, run_dir: Path, out_dir: Path, round_no: int) -> dict | None:
    """Analyze one checkpoint round; returns the agent -> neighbours map."""
    params = _load_round_params(run_dir, round_no)
    if len(params) < 2:
        print("error: need at least two agents to analyse similarity", file=sys.stderr)
        return None
    result = similarity_matrix(params, standardize=args.standardize)
    dend = hierarchical_cluster(result)
    k = min(args.clusters, len(result.names))
    labels = dend.cut(k)

    print(f"similarity analysis of {run_dir} at round {round_no} ({len(result.names)} agents)")
    print("\nnearest neighbours (cosine similarity):")
    neighbours = {}
    for name in result.names:
        top = top_k_similar(result, name, k=args.top_k)
        neighbours[name] = [{"agent": m, "similarity": s} for m, s in top]
        listing = ", ".join(f"{m} ({s:+.3f})" for m, s in top)
        print(f"  {name}: {listing}")
    print(f"\nhierarchical grouping cut at k={k}:")
    groups: dict[int, list[str]] = {}
    for name, lab in sorted(labels.items()):
        groups.setdefault(lab, []).append(name)
    for lab in sorted(groups):
        print(f"  group {lab}: {', '.join(groups[lab])}")

    clusters = {
        "round": round_no,
        "standardize": bool(args.standardize),
        "agents": result.names,
        "zero_agents": result.zero_agents,
        "cut_k": k,
        "labels": labels,
        "groups": {str(lab): groups[lab] for lab in sorted(groups)},
        "merges": [
            {"left": a, "right": b, "height": h, "size": s} for a, b, h, s in dend.merges
        ],
    }

    rounds_path = run_dir / "rounds.jsonl"
    if rounds_path.exists():
        try:
            record = round_snapshot(load_rounds(rounds_path), round_no)
        except KeyError:
            record = None
        if record and "fomo_weights" in record:
            affinity = fomo_affinity(record["fomo_weights"])
            clusters["fomo_affinity"] = affinity.matrix.tolist()
            (out_dir / f"affinity_heatmap_round_{round_no}.svg").write_text(
                similarity_heatmap_svg(affinity, title=f"importance affinity, round {round_no}")
            )
            print(f"\nfomo importance affinity written (affinity_heatmap_round_{round_no}.svg)")

    _write_similarity_csv(out_dir / f"similarity_round_{round_no}.csv", result)
    (out_dir / f"clusters_round_{round_no}.json").write_text(
        json.dumps(clusters, indent=2, sort_keys=True) + "\n"
    )
    (out_dir / f"similarity_heatmap_round_{round_no}.svg").write_text(
        similarity_heatmap_svg(result, title=f"parameter similarity, round {round_no}")
    )
    return neighbours


def _cmd_analyze(args: argparse.Namespace) -> int:
    raw_dir = args.run_opt or args.run_dir
    if raw_dir is None:
        print("error: no run directory given (positional or --run)", file=sys.stderr)
        return 1
    run_dir = Path(raw_dir)
    if not run_dir.is_dir():
        print(f"error: {run_dir} is not a directory", file=sys.stderr)
        return 1
    available = _checkpoint_rounds(run_dir)
    if not available:
        print(f"error: no checkpoints under {run_dir}/checkpoints", file=sys.stderr)
        return 1
    if args.rounds is not None:
        try:
            requested = [int(part) for part in args.rounds.split(",") if part.strip()]
        except ValueError:
            print(f"error: --rounds must be comma-separated integers, got {args.rounds!r}", file=sys.stderr)
            return 1
        if not requested:
            print("error: --rounds named no rounds", file=sys.stderr)
            return 1
    else:
        requested = [available[-1]]
    missing = [r for r in requested if r not in available]
    if missing:
        print(
            f"error: no checkpoint for round(s) {', '.join(map(str, missing))}; "
            f"available rounds: {', '.join(map(str, available))}",
            file=sys.stderr,
        )
        return 1

    out_dir = Path(args.out) if args.out else run_dir / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)
    top_k_report: dict[str, dict] = {}
    for i, round_no in enumerate(requested):
        if i:
            print()
        neighbours = _analyze_one_round(args, run_dir, out_dir, round_no)
        if neighbours is None:
            return 1
        top_k_report[str(round_no)] = neighbours

    (out_dir / "top_k.json").write_text(
        json.dumps({"k": args.top_k, "rounds": top_k_report}, indent=2, sort_keys=True) + "\n"
    )
    print(f"\nreports written to {out_dir}")
    return 0


# -- compare ----------------------------------------------------------------


def _read_summary(run_dir: Path) -> dict:
    path = run_dir / "summary.json"
    if not path.exists():
        raise FileNotFoundError(f"{run_dir} has no summary.json (not a finished run?)")
    return json.loads(path.read_text())


def _read_eval_curve(run_dir: Path) -> list[tuple[float, float]]:
    import csv

    path = run_dir / "evals.csv"
    if not path.exists():
        return []
    with open(path) as fh:
        return [(float(r["round"]), float(r["mean_reward"])) for r in csv.DictReader(fh)]


def _cmd_compare(args: argparse.Namespace) -> int:
    rows = []
    for raw in args.run_dirs:
        run_dir = Path(raw)
        try:
            summary = _read_summary(run_dir)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        rows.append((run_dir, summary))

    fixed_travel = None
    for _, summary in rows:
        if summary["method"] == "fixed" and "final_eval" in summary:
            fixed_travel = summary["final_eval"]["mean_travel_s"]

    header = f"{'run':28s} {'method':13s} {'eval reward':>12s} {'travel s':>9s} {'wait s':>8s} {'comm bytes':>14s}"
    print(header)
    print("-" * len(header))
    flagged = []
    table_rows = []
    for run_dir, summary in rows:
        final = summary.get("final_eval", {})
        reward = final.get("mean_reward")
        travel = final.get("mean_travel_s")
        wait = final.get("mean_wait_s")
        comm = summary["comm"]["total_bytes"]
        mark = ""
        if (
            fixed_travel is not None
            and travel is not None
            and summary["method"] not in ("fixed", "actuated")
            and travel >= fixed_travel
        ):
            mark = "  <- not better than fixed-time"
            flagged.append(summary["name"])
        print(
            f"{summary['name'][:28]:28s} {summary['method']:13s} "
            f"{reward if reward is None else format(reward, '+.4f'):>12} "
            f"{travel if travel is None else format(travel, '.1f'):>9} "
            f"{wait if wait is None else format(wait, '.1f'):>8} "
            f"{comm:>14,}{mark}"
        )
        table_rows.append(
            {
                "name": summary["name"],
                "method": summary["method"],
                "seed": summary["seed"],
                "final_eval_reward": reward,
                "final_eval_travel_s": travel,
                "final_eval_wait_s": wait,
                "comm_total_bytes": comm,
                "better_than_fixed": (
                    "" if fixed_travel is None or travel is None else str(travel < fixed_travel)
                ),
            }
        )
    if flagged:
        print(f"\nwarning: not better than fixed-time: {', '.join(flagged)}")

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        from ..metrics import write_csv

        write_csv(
            out_dir / "comparison.csv",
            table_rows,
            fieldnames=[
                "name", "method", "seed", "final_eval_reward", "final_eval_travel_s",
                "final_eval_wait_s", "comm_total_bytes", "better_than_fixed",
            ],
        )
        curves = {}
        for run_dir, summary in rows:
            pts = _read_eval_curve(run_dir)
            if pts:
                curves[f"{summary['name']} ({summary['method']})"] = pts
        if curves:
            (out_dir / "eval_curves.svg").write_text(
                line_chart(curves, title="evaluation reward", x_label="round", y_label="mean reward")
            )
        print(f"comparison written to {out_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        return _cmd_compare(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
