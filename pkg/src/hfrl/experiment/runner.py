"""Seeded end-to-end experiment orchestration.

One run trains (or just drives) a set of intersection controllers over a
sequence of simulated episodes and, for round-based methods, federates
their parameters every ``round_interval`` steps.  All methods share the
same episode traffic: demand seeds derive only from the config seed and
the episode number, never from the method, so different controllers can
face identical arrival sequences.

Greedy evaluation episodes run after round 1, after every
``eval_every``-th round, and after the final round, on their own seed
stream.  Evaluation never trains and never counts toward communication.

Artifacts written to ``out_dir`` (all deterministic, no timestamps):

    resolved_config.json   the full config plus derived quantities
    metrics.csv            one row per training episode
    rewards.csv            per-round, per-agent surrogate loss and reward
    rounds.jsonl           federation diagnostics, one JSON object per round
    evals.csv              one row per evaluation point
    reward_curve.svg       evaluation reward against round number
    checkpoints/           per-agent parameter snapshots at eval rounds
    summary.json           headline numbers for quick comparison
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from ..agents.a2c import A2CLearner, scalar_loss
from ..agents.centralized import CentralizedLearner
from ..agents.checkpoint import save_model
from ..agents.networks import ModelParams, count_params, flatten_params, init_model, unflatten_params
from ..federation.server import AgentUpload, run_round
from ..metrics import (
    CommBreakdown,
    EpisodeRecord,
    add_breakdowns,
    architecture_of,
    comm_cost,
    travel_time_stats,
    waiting_time_stats,
    write_csv,
)
from ..svgplot import line_chart
from ..traffic.scenarios import Scenario, get_scenario, scenario_from_dict
from ..traffic.simulate import build_sim, local_reward, observe, step
from ..traffic.network import build_network
from .baselines import ActuatedController, FixedTimeController
from .config import ROUND_BASED_METHODS, ExperimentConfig

_SERVER_METHOD = {"fedavg": "fedavg", "cluster": "cluster", "fomo": "fomo", "decentralized": "none"}


@dataclass
class RunResult:
    config: ExperimentConfig
    out_dir: Path | None
    agent_names: list[str]
    param_dim: int
    episode_records: list[EpisodeRecord]
    eval_records: list[dict]
    round_records: list[dict]
    reward_rows: list[dict]
    comm: CommBreakdown
    final_params: dict[str, np.ndarray] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def _resolve_scenario(config: ExperimentConfig) -> Scenario:
    if config.scenario_overrides:
        table = {"base": config.scenario, **config.scenario_overrides}
        return scenario_from_dict(table)
    return get_scenario(config.scenario)


class _Controllers:
    """Uniform act/record facade over the five controller families."""

    def __init__(self, config: ExperimentConfig, names: list[str], obs_dim: int):
        self.config = config
        self.names = names
        self.method = config.method
        self.template: ModelParams | None = None
        self.learners: dict[str, A2CLearner] = {}
        self.central: CentralizedLearner | None = None
        self.fixed: FixedTimeController | None = None
        self.actuated: ActuatedController | None = None

        if self.method in ROUND_BASED_METHODS:
            # every agent starts from one shared initialisation; divergence
            # afterwards reflects local traffic, which is what the
            # similarity and clustering analyses measure
            self.template = init_model(
                obs_dim=obs_dim,
                hidden=config.hidden,
                n_actions=2,
                activation=config.activation,
                seed=_derive_seed(config.seed, 11),
            )
            for idx, name in enumerate(names):
                rng = np.random.default_rng(_derive_seed(config.seed, 13, idx))
                self.learners[name] = A2CLearner(self.template, config.hyper, rng)
        elif self.method == "centralized":
            self.central = CentralizedLearner(
                agent_names=names,
                obs_dim=obs_dim,
                hyper=config.hyper,
                hidden=config.hidden,
                activation=config.activation,
                seed=_derive_seed(config.seed, 11),
            )
        elif self.method == "fixed":
            self.fixed = FixedTimeController(green_s=config.fixed_green_s)
        else:
            self.actuated = ActuatedController(gap_s=config.actuated_gap_s)

    @property
    def param_dim(self) -> int:
        if self.template is not None:
            return count_params(self.template)
        if self.central is not None:
            return count_params(self.central.params)
        return 0

    def new_episode(self) -> None:
        if self.actuated is not None:
            self.actuated = ActuatedController(gap_s=self.config.actuated_gap_s)

    def act(self, state, obs: dict[str, np.ndarray], greedy: bool = False) -> dict[str, int]:
        if self.learners:
            return {n: self.learners[n].act(obs[n], greedy=greedy) for n in self.names}
        if self.central is not None:
            return self.central.act(obs, greedy=greedy)
        ctl = self.fixed or self.actuated
        return {n: ctl.act(state, n) for n in self.names}

    def record(self, obs, actions, rewards, next_obs) -> None:
        for n, learner in self.learners.items():
            learner.record(obs[n], actions[n], rewards[n], next_obs[n])
        if self.central is not None:
            self.central.record(obs, actions, rewards, next_obs)

    def flush_central(self) -> None:
        if self.central is not None:
            self.central.flush()


def _episode_metrics(state) -> tuple[int, int, float, float]:
    tstats = travel_time_stats(state)
    wstats = waiting_time_stats(state)
    return (
        state.spawned_due,
        len(state.completed),
        tstats.mean_s,
        wstats.mean_s,
    )


def _run_eval(
    config: ExperimentConfig,
    scenario: Scenario,
    network,
    controllers: _Controllers,
    round_no: int,
) -> dict:
    rewards: list[float] = []
    travels: list[float] = []
    waits: list[float] = []
    completed = 0
    spawned = 0
    for k in range(config.eval_episodes):
        eval_seed = _derive_seed(config.seed, 17, round_no, k)
        state = build_sim(network, scenario.sim, scenario.demand, seed=eval_seed, horizon_s=config.steps_per_episode)
        eval_ctl = controllers
        if config.method == "actuated":
            eval_ctl = _Controllers(config, controllers.names, obs_dim=6)
        step_rewards = []
        obs = {n: observe(state, n).as_vector() for n in controllers.names}
        for _ in range(config.steps_per_episode):
            actions = eval_ctl.act(state, obs, greedy=True)
            step(state, actions)
            obs = {n: observe(state, n).as_vector() for n in controllers.names}
            step_rewards.append(np.mean([local_reward(state, n) for n in controllers.names]))
        rewards.append(float(np.mean(step_rewards)))
        sp, co, tr, wa = _episode_metrics(state)
        spawned += sp
        completed += co
        travels.append(tr)
        waits.append(wa)
    return {
        "round": round_no,
        "mean_reward": float(np.mean(rewards)),
        "mean_travel_s": float(np.nanmean(travels)) if travels else float("nan"),
        "mean_wait_s": float(np.nanmean(waits)) if waits else float("nan"),
        "completed": completed,
        "spawned": spawned,
        "episodes": config.eval_episodes,
    }


def _save_checkpoints(
    out_dir: Path, controllers: _Controllers, round_no: int, method: str, seed: int
) -> None:
    ck_dir = out_dir / "checkpoints" / f"round_{round_no:03d}"
    ck_dir.mkdir(parents=True, exist_ok=True)
    meta = {"round": round_no, "method": method, "seed": seed}
    if controllers.learners:
        for name, learner in controllers.learners.items():
            save_model(ck_dir / f"{name}.bin", learner.params, {"agent": name, **meta})
    elif controllers.central is not None:
        save_model(ck_dir / "joint.bin", controllers.central.params, {"agent": "joint", **meta})


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None, echo=None) -> RunResult:
    """Execute one full experiment; see the module docstring for outputs."""
    scenario = _resolve_scenario(config)
    network = build_network(scenario.network)
    names = sorted(network.intersections)
    controllers = _Controllers(config, names, obs_dim=6)

    architecture = architecture_of(config.method)
    eval_rounds = set(config.eval_rounds())
    round_based = config.method in ROUND_BASED_METHODS

    episode_records: list[EpisodeRecord] = []
    eval_records: list[dict] = []
    round_records: list[dict] = []
    reward_rows: list[dict] = []
    total_comm = CommBreakdown(0, 0, 0, 0, 0)
    prev_flat = {n: flatten_params(controllers.learners[n].params) for n in names} if round_based else {}

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    round_no = 0
    round_reward_sums = {n: 0.0 for n in names}
    round_reward_steps = 0

    for episode in range(1, config.episodes + 1):
        epi_seed = _derive_seed(config.seed, 3, episode)
        state = build_sim(network, scenario.sim, scenario.demand, seed=epi_seed, horizon_s=config.steps_per_episode)
        controllers.new_episode()
        obs = {n: observe(state, n).as_vector() for n in names}
        episode_reward_sum = 0.0

        for step_i in range(1, config.steps_per_episode + 1):
            actions = controllers.act(state, obs)
            step(state, actions)
            next_obs = {n: observe(state, n).as_vector() for n in names}
            rewards = {n: local_reward(state, n) for n in names}
            controllers.record(obs, actions, rewards, next_obs)
            obs = next_obs
            episode_reward_sum += float(np.mean(list(rewards.values())))
            for n in names:
                round_reward_sums[n] += rewards[n]
            round_reward_steps += 1

            if step_i % config.round_interval == 0:
                round_no += 1
                if round_based:
                    uploads = []
                    loss_fns = {}
                    for n in names:
                        learner = controllers.learners[n]
                        traj, loss = learner.end_round()
                        uploads.append(
                            AgentUpload(
                                agent=n,
                                params=flatten_params(learner.params),
                                prev_params=prev_flat[n],
                                loss=loss,
                                n_steps=len(traj),
                            )
                        )
                        h = config.hyper
                        loss_fns[n] = partial(_loss_of_flat, controllers.template, traj, h)
                    rnd = run_round(
                        uploads,
                        _SERVER_METHOD[config.method],
                        n_clusters=config.n_clusters,
                        fomo_alpha=config.fomo_alpha,
                        loss_fns=loss_fns,
                        seed=_derive_seed(config.seed, 19, round_no),
                    )
                    for n in names:
                        broadcast = rnd.broadcasts[n]
                        controllers.learners[n].set_params(unflatten_params(controllers.template, broadcast))
                        prev_flat[n] = broadcast.copy()
                    record = {"round": round_no, "episode": episode, **rnd.diagnostics}
                    round_records.append(record)
                    for n in names:
                        reward_rows.append(
                            {
                                "round": round_no,
                                "agent": n,
                                "loss": rnd.diagnostics["losses"][n],
                                "mean_reward": round_reward_sums[n] / round_reward_steps,
                            }
                        )
                round_reward_sums = {n: 0.0 for n in names}
                round_reward_steps = 0

                if round_no in eval_rounds:
                    eval_rec = _run_eval(config, scenario, network, controllers, round_no)
                    eval_records.append(eval_rec)
                    if echo:
                        echo(
                            f"  round {round_no:3d}: eval reward {eval_rec['mean_reward']:+.4f}, "
                            f"travel {eval_rec['mean_travel_s']:.1f} s"
                        )
                    if out_path is not None:
                        _save_checkpoints(out_path, controllers, round_no, config.method, config.seed)

        controllers.flush_central()
        spawned, completed, mean_travel, mean_wait = _episode_metrics(state)
        rounds_this_episode = config.rounds_per_episode if round_based else 0
        epi_comm = comm_cost(
            architecture,
            n_agents=len(names),
            steps=config.steps_per_episode,
            completed_trips=completed,
            rounds=rounds_this_episode,
            param_dim=controllers.param_dim,
        )
        total_comm = add_breakdowns(total_comm, epi_comm)
        episode_records.append(
            EpisodeRecord(
                method=config.method,
                seed=config.seed,
                episode=episode,
                phase="train",
                round=round_no,
                steps=config.steps_per_episode,
                spawned=spawned,
                completed=completed,
                mean_travel_s=mean_travel,
                mean_wait_s=mean_wait,
                mean_reward=episode_reward_sum / config.steps_per_episode,
                comm_upload_bytes=epi_comm.upload_bytes,
                comm_download_bytes=epi_comm.download_bytes,
                comm_action_bytes=epi_comm.action_bytes,
                comm_obs_bytes=epi_comm.obs_bytes,
                comm_report_bytes=epi_comm.report_bytes,
                comm_total_bytes=epi_comm.total_bytes,
            )
        )
        if echo:
            echo(
                f"episode {episode:3d}/{config.episodes}: train reward "
                f"{episode_records[-1].mean_reward:+.4f}, completed {completed}"
            )

    final_params: dict[str, np.ndarray] = {}
    if controllers.learners:
        final_params = {n: flatten_params(controllers.learners[n].params) for n in names}
    elif controllers.central is not None:
        final_params = {"joint": flatten_params(controllers.central.params)}

    summary = _build_summary(config, names, controllers.param_dim, episode_records, eval_records, total_comm)
    result = RunResult(
        config=config,
        out_dir=out_path,
        agent_names=names,
        param_dim=controllers.param_dim,
        episode_records=episode_records,
        eval_records=eval_records,
        round_records=round_records,
        reward_rows=reward_rows,
        comm=total_comm,
        final_params=final_params,
        summary=summary,
    )
    if out_path is not None:
        _write_artifacts(result)
    return result


def _loss_of_flat(template: ModelParams, traj, hyper, flat: np.ndarray) -> float:
    return scalar_loss(
        unflatten_params(template, flat),
        traj,
        hyper.gamma,
        hyper.k_steps,
        hyper.value_coef,
        hyper.entropy_coef,
    )


def _build_summary(config, names, param_dim, episode_records, eval_records, comm) -> dict:
    summary = {
        "name": config.name,
        "method": config.method,
        "scenario": config.scenario,
        "seed": config.seed,
        "n_agents": len(names),
        "param_dim": param_dim,
        "episodes": config.episodes,
        "total_rounds": config.total_rounds,
        "comm": comm.as_dict(),
        "train_mean_reward_last_episode": episode_records[-1].mean_reward if episode_records else None,
    }
    if eval_records:
        summary["first_eval"] = eval_records[0]
        summary["final_eval"] = eval_records[-1]
        summary["eval_reward_improvement"] = (
            eval_records[-1]["mean_reward"] - eval_records[0]["mean_reward"]
        )
    return summary


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def _write_artifacts(result: RunResult) -> None:
    out = result.out_dir
    config = result.config

    resolved = {
        "config": config.to_dict(),
        "derived": {
            "agent_names": result.agent_names,
            "n_agents": len(result.agent_names),
            "param_dim": result.param_dim,
            "total_rounds": config.total_rounds,
            "eval_rounds": config.eval_rounds(),
            "architecture": architecture_of(config.method),
        },
    }
    (out / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True, default=_json_default) + "\n"
    )
    write_csv(out / "metrics.csv", result.episode_records)
    if result.reward_rows:
        write_csv(out / "rewards.csv", result.reward_rows, fieldnames=["round", "agent", "loss", "mean_reward"])
    if result.round_records:
        with open(out / "rounds.jsonl", "w") as fh:
            for record in result.round_records:
                fh.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")
    if result.eval_records:
        write_csv(
            out / "evals.csv",
            result.eval_records,
            fieldnames=["round", "mean_reward", "mean_travel_s", "mean_wait_s", "completed", "spawned", "episodes"],
        )
        curve = {
            config.method: [(r["round"], r["mean_reward"]) for r in result.eval_records],
        }
        (out / "reward_curve.svg").write_text(
            line_chart(curve, title=f"{config.name}: evaluation reward", x_label="round", y_label="mean reward")
        )
    (out / "summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True, default=_json_default) + "\n"
    )
