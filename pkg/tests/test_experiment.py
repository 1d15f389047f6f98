"""Tests for experiment configuration, baseline controllers, the runner,
and the command-line interface."""

from __future__ import annotations

import csv
import dataclasses
import json

import numpy as np
import pytest

from hfrl.agents import A2CHyper, load_model, flatten_params
from hfrl.experiment import (
    ActuatedController,
    ConfigError,
    ExperimentConfig,
    FixedTimeController,
    config_from_dict,
    load_config,
    run_experiment,
)
from hfrl.experiment.cli import main as cli_main
from hfrl.experiment.config import MODEL_PRESETS, TRAINING_PRESETS
from hfrl.traffic import build_network, build_sim, get_scenario, step
from hfrl.traffic.scenarios import scenario_from_dict
from hfrl.traffic.simulate import NS_GREEN, EW_GREEN


# ---------------------------------------------------------------------------
# configuration


def test_default_config_is_valid():
    cfg = ExperimentConfig()
    assert cfg.method == "fedavg"
    assert cfg.rounds_per_episode == 2
    assert cfg.total_rounds == 40


def test_config_rejects_bad_method():
    with pytest.raises(ConfigError, match="method"):
        ExperimentConfig(method="magic")


def test_config_rejects_unknown_scenario():
    with pytest.raises(ConfigError, match="unknown scenario"):
        ExperimentConfig(scenario="gotham")


def test_scenario_override_bypasses_name_check():
    cfg = ExperimentConfig(
        scenario="custom", scenario_overrides={"base": "grid1x1", "inflow_per_lane_vph": 50.0}
    )
    assert cfg.scenario == "custom"


def test_config_rejects_bad_round_interval():
    with pytest.raises(ConfigError, match="divide"):
        ExperimentConfig(steps_per_episode=500, round_interval=300)


def test_config_rejects_nonpositive_counts():
    with pytest.raises(ConfigError):
        ExperimentConfig(episodes=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(eval_episodes=-1)
    with pytest.raises(ConfigError):
        ExperimentConfig(hidden=())


def test_eval_rounds_schedule():
    cfg = ExperimentConfig(episodes=2, steps_per_episode=600, round_interval=300, eval_every=3)
    # total rounds 4: round 1 always, multiples of 3, and the final round
    assert cfg.eval_rounds() == [1, 3, 4]


def test_eval_rounds_empty_without_eval_episodes():
    cfg = ExperimentConfig(eval_episodes=0)
    assert cfg.eval_rounds() == []


def test_config_to_dict_is_json_ready():
    blob = json.dumps(ExperimentConfig().to_dict())
    assert "fedavg" in blob


def test_config_from_dict_applies_presets():
    cfg = config_from_dict(
        {
            "experiment": {"name": "t", "method": "cluster", "seed": 3},
            "model": {"preset": "wide"},
            "training": {"preset": "prose", "lr": 0.5},
        }
    )
    assert cfg.hidden == tuple(MODEL_PRESETS["wide"]["hidden"])
    assert cfg.activation == "relu"
    assert cfg.hyper.lr == 0.5  # explicit key overrides the preset
    assert cfg.hyper.rollout_len == TRAINING_PRESETS["prose"].rollout_len


def test_config_from_dict_rejects_unknown_section():
    with pytest.raises(ConfigError, match="unknown config sections"):
        config_from_dict({"experimnt": {}})


def test_config_from_dict_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown keys"):
        config_from_dict({"experiment": {"nmae": "oops"}})


def test_config_from_dict_rejects_unknown_presets():
    with pytest.raises(ConfigError, match="model preset"):
        config_from_dict({"model": {"preset": "huge"}})
    with pytest.raises(ConfigError, match="training preset"):
        config_from_dict({"training": {"preset": "fast"}})


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        "\n".join(
            [
                "[experiment]",
                'name = "toml-test"',
                'method = "fomo"',
                "seed = 9",
                "episodes = 2",
                "[federation]",
                "fomo_alpha = 0.5",
            ]
        )
    )
    cfg = load_config(path)
    assert cfg.name == "toml-test"
    assert cfg.method == "fomo"
    assert cfg.seed == 9
    assert cfg.fomo_alpha == 0.5


def test_load_config_reports_toml_syntax_errors(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[experiment\nname = oops")
    with pytest.raises(ConfigError):
        load_config(path)


# ---------------------------------------------------------------------------
# baseline controllers


def _run_controller(controller, scenario, steps, seed=0):
    """Drive a sim with a per-intersection controller, returning the phase
    trace of every signal."""
    net = build_network(scenario.network)
    state = build_sim(net, scenario.sim, scenario.demand, seed=seed, horizon_s=steps)
    traces = {name: [] for name in net.intersections}
    for _ in range(steps):
        actions = {name: controller.act(state, name) for name in net.intersections}
        step(state, actions)
        for name in net.intersections:
            traces[name].append(state.signals[name].phase)
    return traces


def _phase_durations(trace, dt_s=1.0):
    """Collapse a phase trace into (phase, duration_s) runs."""
    runs = []
    for phase in trace:
        if runs and runs[-1][0] == phase:
            runs[-1][1] += dt_s
        else:
            runs.append([phase, dt_s])
    return [(p, d) for p, d in runs]


def test_fixed_time_green_lasts_exactly_green_s():
    sc = get_scenario("grid1x1")
    traces = _run_controller(FixedTimeController(green_s=10.0), sc, steps=120)
    runs = _phase_durations(next(iter(traces.values())))
    greens = [d for p, d in runs[:-1] if p in (NS_GREEN, EW_GREEN)]
    yellows = [d for p, d in runs[:-1] if p not in (NS_GREEN, EW_GREEN)]
    assert greens and all(d == 10.0 for d in greens)
    assert yellows and all(d == 3.0 for d in yellows)


def test_fixed_time_rejects_bad_green():
    with pytest.raises(ValueError):
        FixedTimeController(green_s=0.0)


def test_actuated_gaps_out_at_min_green_without_traffic():
    sc = scenario_from_dict({"base": "grid1x1", "inflow_per_lane_vph": 0.0})
    traces = _run_controller(ActuatedController(gap_s=3.0), sc, steps=80)
    runs = _phase_durations(next(iter(traces.values())))
    greens = [d for p, d in runs[:-1] if p in (NS_GREEN, EW_GREEN)]
    # no presence ever: the gap expires during the minimum green, so each
    # green lasts exactly the simulator's 4 s floor
    assert greens and all(d == 4.0 for d in greens)


def test_actuated_extends_green_under_demand():
    sc = scenario_from_dict({"base": "grid1x1", "inflow_per_lane_vph": 600.0})
    traces = _run_controller(ActuatedController(gap_s=3.0), sc, steps=300, seed=4)
    runs = _phase_durations(next(iter(traces.values())))
    greens = [d for p, d in runs[:-1] if p in (NS_GREEN, EW_GREEN)]
    assert greens
    assert max(greens) > 4.0  # presence held at least one green past the floor
    assert all(d <= 120.0 for d in greens)


def test_actuated_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ActuatedController(gap_s=0.0)
    with pytest.raises(ValueError):
        ActuatedController(detector_m=-1.0)


# ---------------------------------------------------------------------------
# runner

_FAST = dict(
    scenario="grid1x1",
    episodes=2,
    steps_per_episode=200,
    round_interval=100,
    eval_every=2,
    eval_episodes=1,
)


def test_run_experiment_is_deterministic():
    cfg = ExperimentConfig(name="det", method="fedavg", seed=11, **_FAST)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a.episode_records == b.episode_records
    assert a.eval_records == b.eval_records
    for name in a.final_params:
        assert np.array_equal(a.final_params[name], b.final_params[name])


def test_traffic_is_method_independent():
    """The same seed spawns the same vehicles whatever the controller."""
    spawned = {}
    for method in ("fixed", "fedavg"):
        cfg = ExperimentConfig(name="pair", method=method, seed=5, **_FAST)
        res = run_experiment(cfg)
        spawned[method] = [r.spawned for r in res.episode_records]
    assert spawned["fixed"] == spawned["fedavg"]


def test_run_experiment_schedules_evals_and_rounds():
    cfg = ExperimentConfig(name="sched", method="fedavg", seed=0, **_FAST)
    res = run_experiment(cfg)
    assert [r["round"] for r in res.eval_records] == cfg.eval_rounds()
    assert [r["round"] for r in res.round_records] == list(range(1, cfg.total_rounds + 1))
    assert len(res.episode_records) == cfg.episodes


def test_run_experiment_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    cfg = ExperimentConfig(name="art", method="cluster", scenario="grid3x3", seed=1,
                           episodes=1, steps_per_episode=200, round_interval=100,
                           eval_every=2, eval_episodes=1)
    res = run_experiment(cfg, out_dir=out)

    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["config"]["method"] == "cluster"
    assert resolved["derived"]["n_agents"] == 9
    assert resolved["derived"]["architecture"] == "federated"

    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == cfg.episodes
    assert int(rows[0]["spawned"]) > 0

    round_lines = [json.loads(line) for line in (out / "rounds.jsonl").read_text().splitlines()]
    assert [r["round"] for r in round_lines] == [1, 2]
    assert "cluster_labels" in round_lines[0]

    with open(out / "evals.csv") as fh:
        evals = list(csv.DictReader(fh))
    assert [int(r["round"]) for r in evals] == cfg.eval_rounds()

    summary = json.loads((out / "summary.json").read_text())
    assert summary["comm"]["total_bytes"] == res.comm.total_bytes
    assert "final_eval" in summary

    svg = (out / "reward_curve.svg").read_text()
    assert svg.startswith("<svg")


def test_checkpoints_match_final_params(tmp_path):
    out = tmp_path / "run"
    cfg = ExperimentConfig(name="ckpt", method="fedavg", seed=2, **_FAST)
    res = run_experiment(cfg, out_dir=out)
    final_round = cfg.total_rounds
    ckpt_dir = out / "checkpoints" / f"round_{final_round:03d}"
    for name in res.agent_names:
        params, meta = load_model(ckpt_dir / f"{name}.bin")
        assert np.array_equal(flatten_params(params), res.final_params[name])
        assert meta["round"] == final_round


def test_non_learning_methods_skip_rounds():
    cfg = ExperimentConfig(name="base", method="fixed", seed=0, **_FAST)
    res = run_experiment(cfg)
    assert res.round_records == []
    assert res.final_params == {}
    assert res.comm.upload_bytes == 0
    # evaluation still runs so baselines are comparable
    assert [r["round"] for r in res.eval_records] == cfg.eval_rounds()


def test_centralized_runs_and_reports_joint_params():
    cfg = ExperimentConfig(name="cen", method="centralized", seed=0, **_FAST)
    res = run_experiment(cfg)
    assert list(res.final_params) == ["joint"]
    assert res.comm.upload_bytes == 0
    assert res.comm.obs_bytes > 0


def test_decentralized_pays_no_param_traffic():
    cfg = ExperimentConfig(name="dec", method="decentralized", seed=0, **_FAST)
    res = run_experiment(cfg)
    assert res.comm.upload_bytes == 0
    assert res.comm.download_bytes == 0
    assert len(res.round_records) == cfg.total_rounds


# ---------------------------------------------------------------------------
# command-line interface


def _write_cli_config(tmp_path):
    path = tmp_path / "cli.toml"
    path.write_text(
        "\n".join(
            [
                "[experiment]",
                'name = "cli-test"',
                'method = "cluster"',
                'scenario = "grid3x3"',
                "seed = 3",
                "episodes = 1",
                "steps_per_episode = 200",
                "round_interval = 100",
                "eval_every = 2",
            ]
        )
    )
    return path


def test_cli_run_analyze_compare(tmp_path, capsys):
    cfg_path = _write_cli_config(tmp_path)
    out = tmp_path / "out"

    assert cli_main(["run", str(cfg_path), "--out", str(out), "--quiet"]) == 0
    printed = capsys.readouterr().out
    assert "run complete" in printed
    assert (out / "metrics.csv").exists()

    assert cli_main(["analyze", "--run", str(out), "--rounds", "1,2", "--top-k", "2"]) == 0
    printed = capsys.readouterr().out
    assert "nearest neighbours" in printed
    analysis_dir = out / "analysis"
    for round_no in (1, 2):
        clusters = json.loads((analysis_dir / f"clusters_round_{round_no}.json").read_text())
        assert clusters["round"] == round_no
        assert sum(len(g) for g in clusters["groups"].values()) == 9
        with open(analysis_dir / f"similarity_round_{round_no}.csv") as fh:
            sim_rows = list(csv.reader(fh))
        assert len(sim_rows) == 10  # header plus one row per agent
        assert (analysis_dir / f"similarity_heatmap_round_{round_no}.svg").exists()
    top_k = json.loads((analysis_dir / "top_k.json").read_text())
    assert set(top_k["rounds"]) == {"1", "2"}
    assert len(top_k["rounds"]["2"]["A0"]) == 2

    cmp_out = tmp_path / "cmp"
    assert cli_main(["compare", str(out), "--out", str(cmp_out)]) == 0
    printed = capsys.readouterr().out
    assert "cli-test" in printed
    assert (cmp_out / "comparison.csv").exists()


def test_cli_run_overrides_take_effect(tmp_path):
    out = tmp_path / "o"
    code = cli_main(
        ["run", "--method", "fixed", "--scenario", "grid1x1", "--episodes", "1",
         "--seed", "4", "--name", "ov", "--out", str(out), "--quiet"]
    )
    assert code == 0
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["config"]["method"] == "fixed"
    assert resolved["config"]["seed"] == 4


def test_cli_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[experiment]\nmethod = "sorcery"\n')
    assert cli_main(["run", str(bad), "--quiet"]) == 2
    assert "sorcery" in capsys.readouterr().err


def test_cli_reports_missing_paths(tmp_path, capsys):
    assert cli_main(["run", str(tmp_path / "absent.toml"), "--quiet"]) == 1
    assert cli_main(["analyze", str(tmp_path / "nope")]) == 1
    assert cli_main(["compare", str(tmp_path / "nope")]) == 1
    err = capsys.readouterr().err
    assert "error" in err


def test_cli_analyze_rejects_missing_round(tmp_path, capsys):
    cfg_path = _write_cli_config(tmp_path)
    out = tmp_path / "out"
    assert cli_main(["run", str(cfg_path), "--out", str(out), "--quiet"]) == 0
    capsys.readouterr()
    assert cli_main(["analyze", str(out), "--rounds", "99"]) == 1
    assert "available" in capsys.readouterr().err
