"""Experiment configuration: dataclass, presets, and TOML loading.

A config fully determines a run: scenario, control method, schedule,
model shape, training hyperparameters, and the seed.  Two preset layers
keep TOML files short: a model preset picks the network shape and a
training preset picks the hyperparameter bundle; individual keys can
override either.

TOML layout (every section optional, defaults apply):

    [experiment]
    name = "demo"
    method = "fedavg"          # fedavg | cluster | fomo | decentralized
    scenario = "grid3x3"       #   | centralized | fixed | actuated
    seed = 1
    episodes = 20
    steps_per_episode = 600
    round_interval = 300
    eval_every = 5
    eval_episodes = 1

    [model]
    preset = "desk"            # desk | wide
    hidden = [16, 16]
    activation = "tanh"

    [training]
    preset = "table"           # table | prose
    lr = 1e-4

    [federation]
    n_clusters = 2
    fomo_alpha = 1.0

    [baselines]
    fixed_green_s = 42.0
    actuated_gap_s = 3.0

    [scenario_override]
    base = "grid3x3"
    inflow_per_lane_vph = 250.0
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..agents.a2c import A2CHyper
from ..traffic.scenarios import scenario_names

METHODS = ("fedavg", "cluster", "fomo", "decentralized", "centralized", "fixed", "actuated")
ROUND_BASED_METHODS = ("fedavg", "cluster", "fomo", "decentralized")
LEARNING_METHODS = ROUND_BASED_METHODS + ("centralized",)

MODEL_PRESETS: dict[str, dict] = {
    "desk": {"hidden": (16, 16), "activation": "tanh"},
    "wide": {"hidden": (256, 256), "activation": "relu"},
}

TRAINING_PRESETS: dict[str, A2CHyper] = {
    "table": A2CHyper(
        lr=1e-4, gamma=0.99, k_steps=5, rollout_len=20,
        value_coef=0.5, entropy_coef=0.01, optimizer="sgd", grad_clip=40.0,
    ),
    "prose": A2CHyper(
        lr=1e-3, gamma=0.95, k_steps=5, rollout_len=240,
        value_coef=0.5, entropy_coef=0.01, optimizer="sgd", grad_clip=40.0,
    ),
}


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    method: str = "fedavg"
    scenario: str = "grid3x3"
    seed: int = 0
    episodes: int = 20
    steps_per_episode: int = 600
    round_interval: int = 300
    eval_every: int = 5
    eval_episodes: int = 1
    hidden: tuple[int, ...] = (16, 16)
    activation: str = "tanh"
    hyper: A2CHyper = field(default_factory=lambda: TRAINING_PRESETS["table"])
    n_clusters: int = 2
    fomo_alpha: float = 1.0
    fixed_green_s: float = 42.0
    actuated_gap_s: float = 3.0
    scenario_overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.scenario_overrides and self.scenario not in scenario_names():
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; available: {', '.join(scenario_names())}"
            )
        for key in ("episodes", "steps_per_episode", "round_interval", "eval_every"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be at least 1")
        if self.eval_episodes < 0:
            raise ConfigError("eval_episodes must be non-negative")
        if self.steps_per_episode % self.round_interval != 0:
            raise ConfigError(
                f"round_interval ({self.round_interval}) must divide "
                f"steps_per_episode ({self.steps_per_episode})"
            )
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be at least 1")
        if self.fomo_alpha <= 0:
            raise ConfigError("fomo_alpha must be positive")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden must be a non-empty tuple of positive widths")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def rounds_per_episode(self) -> int:
        return self.steps_per_episode // self.round_interval

    @property
    def total_rounds(self) -> int:
        return self.episodes * self.rounds_per_episode

    def eval_rounds(self) -> list[int]:
        """Rounds after which a greedy evaluation runs."""
        if self.eval_episodes == 0:
            return []
        picks = {r for r in range(1, self.total_rounds + 1) if r == 1 or r % self.eval_every == 0}
        picks.add(self.total_rounds)
        return sorted(picks)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        d["hyper"]["grad_clip"] = self.hyper.grad_clip
        return d


def _take(section: dict, allowed: set[str], where: str) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    return dict(section)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from the sectioned mapping TOML parses into."""
    allowed_sections = {"experiment", "model", "training", "federation", "baselines", "scenario_override"}
    unknown = set(data) - allowed_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    exp = _take(
        data.get("experiment", {}),
        {
            "name", "method", "scenario", "seed", "episodes", "steps_per_episode",
            "round_interval", "eval_every", "eval_episodes",
        },
        "experiment",
    )

    model = _take(data.get("model", {}), {"preset", "hidden", "activation"}, "model")
    preset_name = model.pop("preset", "desk")
    if preset_name not in MODEL_PRESETS:
        raise ConfigError(f"unknown model preset {preset_name!r}; have {sorted(MODEL_PRESETS)}")
    model_kw = dict(MODEL_PRESETS[preset_name])
    if "hidden" in model:
        model_kw["hidden"] = tuple(model["hidden"])
    if "activation" in model:
        model_kw["activation"] = model["activation"]

    training = _take(
        data.get("training", {}),
        {"preset"} | {f.name for f in dataclasses.fields(A2CHyper)},
        "training",
    )
    hyper_name = training.pop("preset", "table")
    if hyper_name not in TRAINING_PRESETS:
        raise ConfigError(f"unknown training preset {hyper_name!r}; have {sorted(TRAINING_PRESETS)}")
    hyper = dataclasses.replace(TRAINING_PRESETS[hyper_name], **training)

    fed = _take(data.get("federation", {}), {"n_clusters", "fomo_alpha"}, "federation")
    base = _take(data.get("baselines", {}), {"fixed_green_s", "actuated_gap_s"}, "baselines")
    overrides = dict(data.get("scenario_override", {}))

    return ExperimentConfig(
        **exp,
        **model_kw,
        hyper=hyper,
        **fed,
        **base,
        scenario_overrides=overrides,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)
