"""Advantage actor-critic with K-step returns.

The learner follows the plain update rules

    critic:  phi   <- phi   + lr * mean_t[ A_t * grad_phi V(s_t) ]
    actor:   theta <- theta + lr * mean_t[ grad_theta log pi(a_t|s_t) * A_t ]
                            + lr * c_e * mean_t[ grad_theta H(pi(.|s_t)) ]

applied once per rollout segment, where the K-step advantage is

    A_t = sum_{i<K'} gamma^i r_{t+i} + gamma^K' V(x_{t+K'}) - V(x_t),
    K'  = min(K, T - t),

with ``x`` the trajectory's states extended by the final observed next
state, so the bootstrap truncates cleanly at the end of a rollout.

``scalar_loss`` is the matching surrogate objective used to compare
parameter vectors on a fixed trajectory (the federation importance
weights need exactly this):

    L(w) = mean_t[ -log pi_theta(a_t|s_t) * A_t(phi)
                   + c_v * A_t(phi)^2  -  c_e * H(pi_theta(.|s_t)) ]

Both the advantage inside the policy term and the squared error term are
recomputed under ``w``'s critic, so L is a genuine differentiable scalar
function of the full parameter vector; ``scalar_loss_grad`` returns its
exact gradient (the value term equals A_t^2 because the target differs
from V(s_t) by exactly A_t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .networks import (
    MLPParams,
    ModelParams,
    flatten_params,
    mlp_backward,
    mlp_forward,
    unflatten_params,
)

REWARD_RANGE = (-4.0, 0.0)
_REWARD_TOL = 1e-9


class DivergenceError(RuntimeError):
    """Raised when an update produces non-finite parameters."""


@dataclass(frozen=True)
class Trajectory:
    """One agent's rollout: arrays over T steps."""

    states: np.ndarray       # (T, obs_dim)
    actions: np.ndarray      # (T,) int
    rewards: np.ndarray      # (T,) in [-4, 0]
    next_states: np.ndarray  # (T, obs_dim)

    def __post_init__(self) -> None:
        s = np.asarray(self.states, dtype=np.float64)
        ns = np.asarray(self.next_states, dtype=np.float64)
        a = np.asarray(self.actions, dtype=np.int64)
        r = np.asarray(self.rewards, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError("states must be (T, obs_dim) with T >= 1")
        if ns.shape != s.shape:
            raise ValueError("next_states must match states' shape")
        if a.shape != (s.shape[0],) or r.shape != (s.shape[0],):
            raise ValueError("actions and rewards must be length-T vectors")
        if r.min(initial=0.0) < REWARD_RANGE[0] - _REWARD_TOL or r.max(initial=-0.0) > REWARD_RANGE[1] + _REWARD_TOL:
            raise ValueError(f"rewards outside {REWARD_RANGE}: [{r.min()}, {r.max()}]")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "actions", a)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "next_states", ns)

    def __len__(self) -> int:
        return int(self.states.shape[0])

    @property
    def states_ext(self) -> np.ndarray:
        """States followed by the final observed next state, (T+1, obs_dim)."""
        return np.vstack([self.states, self.next_states[-1:]])


@dataclass(frozen=True)
class AdvantageEstimate:
    advantages: np.ndarray
    targets: np.ndarray
    gamma: float
    k_steps: int


@dataclass(frozen=True)
class A2CHyper:
    lr: float = 1e-4
    gamma: float = 0.99
    k_steps: int = 5
    rollout_len: int = 20
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    optimizer: str = "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float | None = 40.0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.k_steps < 1:
            raise ValueError("k_steps must be at least 1")
        if self.rollout_len < 1:
            raise ValueError("rollout_len must be at least 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive or None")


class AgentEnv(Protocol):
    """Minimal single-agent environment interface for local_train."""

    def observe(self) -> np.ndarray: ...

    def step(self, action: int) -> tuple[float, np.ndarray]: ...


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def action_probs(params: ModelParams, obs: np.ndarray) -> np.ndarray:
    logits, _ = mlp_forward(params.actor, obs)
    return np.exp(_log_softmax(logits))[0]


def sample_action(
    params: ModelParams,
    obs: np.ndarray,
    rng: np.random.Generator,
    greedy: bool = False,
) -> int:
    """Draw an action from the policy (or take the argmax when greedy)."""
    probs = action_probs(params, obs)
    if greedy:
        return int(np.argmax(probs))
    u = rng.random()
    return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, probs.size - 1))


def compute_advantages(
    traj: Trajectory,
    critic: MLPParams,
    gamma: float,
    k_steps: int,
) -> AdvantageEstimate:
    """K-step advantages and targets under ``critic``, truncated at the end."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if k_steps < 1:
        raise ValueError("k_steps must be at least 1")
    values = mlp_forward(critic, traj.states_ext)[0].ravel()
    T = len(traj)
    targets = np.empty(T, dtype=np.float64)
    for t in range(T):
        horizon = min(k_steps, T - t)
        acc = 0.0
        g = 1.0
        for i in range(horizon):
            acc += g * traj.rewards[t + i]
            g *= gamma
        targets[t] = acc + g * values[t + horizon]
    advantages = targets - values[:T]
    return AdvantageEstimate(advantages=advantages, targets=targets, gamma=gamma, k_steps=k_steps)


def _policy_terms(actor: MLPParams, traj: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list]:
    logits, cache = mlp_forward(actor, traj.states)
    logp = _log_softmax(logits)
    probs = np.exp(logp)
    T = len(traj)
    logp_a = logp[np.arange(T), traj.actions]
    entropy = -(probs * logp).sum(axis=1)
    return probs, logp, logp_a, entropy, cache


def scalar_loss(
    params: ModelParams,
    traj: Trajectory,
    gamma: float,
    k_steps: int,
    value_coef: float = 0.5,
    entropy_coef: float = 0.0,
) -> float:
    """Surrogate objective of ``params`` on a fixed trajectory (lower is better)."""
    _, _, logp_a, entropy, _ = _policy_terms(params.actor, traj)
    adv = compute_advantages(traj, params.critic, gamma, k_steps).advantages
    per_step = -logp_a * adv + value_coef * adv * adv - entropy_coef * entropy
    return float(per_step.mean())


def scalar_loss_grad(
    params: ModelParams,
    traj: Trajectory,
    gamma: float,
    k_steps: int,
    value_coef: float = 0.5,
    entropy_coef: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient, flattened like :func:`flatten_params`.

    The gradient differentiates through every appearance of the critic,
    including the advantage inside the policy term, so it matches central
    finite differences of :func:`scalar_loss` to numerical precision.
    """
    T = len(traj)
    probs, logp, logp_a, entropy, actor_cache = _policy_terms(params.actor, traj)
    values, critic_cache = mlp_forward(params.critic, traj.states_ext)
    values = values.ravel()

    targets = np.empty(T, dtype=np.float64)
    boot_idx = np.empty(T, dtype=np.int64)
    boot_scale = np.empty(T, dtype=np.float64)
    for t in range(T):
        horizon = min(k_steps, T - t)
        acc = 0.0
        g = 1.0
        for i in range(horizon):
            acc += g * traj.rewards[t + i]
            g *= gamma
        targets[t] = acc + g * values[t + horizon]
        boot_idx[t] = t + horizon
        boot_scale[t] = g
    adv = targets - values[:T]

    loss = float((-logp_a * adv + value_coef * adv * adv - entropy_coef * entropy).mean())

    # actor: d/dlogits of mean[-logp_a * adv - c_e * H]; adv has no theta dependence
    onehot = np.zeros_like(probs)
    onehot[np.arange(T), traj.actions] = 1.0
    d_entropy = -probs * (logp + entropy[:, None])  # dH/dlogits
    dlogits = (-adv[:, None] * (onehot - probs) - entropy_coef * d_entropy) / T
    aw, ab = mlp_backward(params.actor, actor_cache, dlogits)

    # critic: dL/dA_t = (-logp_a + 2 c_v A)_t =: u_t and
    # dA_t/dV = gamma^K' at the bootstrap state minus 1 at s_t
    u = -logp_a + 2.0 * value_coef * adv
    w = np.zeros(T + 1, dtype=np.float64)
    np.add.at(w, boot_idx, u * boot_scale)
    np.subtract.at(w, np.arange(T), u)
    cw, cb = mlp_backward(params.critic, critic_cache, (w / T)[:, None])

    parts = []
    for gw, gb in zip(aw, ab):
        parts.append(gw.ravel())
        parts.append(gb.ravel())
    for gw, gb in zip(cw, cb):
        parts.append(gw.ravel())
        parts.append(gb.ravel())
    return loss, np.concatenate(parts)


class A2CLearner:
    """Stateful wrapper around one agent's parameters and update loop.

    Transitions are recorded step by step; every ``rollout_len`` of them
    triggers one batched update with the rules in the module docstring.
    ``end_round`` flushes any partial segment, hands back the round's full
    trajectory plus the surrogate loss of the current parameters on it,
    and starts a new round.
    """

    def __init__(self, params: ModelParams, hyper: A2CHyper, rng: np.random.Generator | int):
        self.params = params.copy()
        self.hyper = hyper
        self.rng = np.random.default_rng(rng)
        self.updates_applied = 0
        self._seg: list[tuple[np.ndarray, int, float, np.ndarray]] = []
        self._round: list[tuple[np.ndarray, int, float, np.ndarray]] = []
        self._adam_m: np.ndarray | None = None
        self._adam_v: np.ndarray | None = None
        self._adam_t = 0

    def act(self, obs: np.ndarray, greedy: bool = False) -> int:
        return sample_action(self.params, obs, self.rng, greedy=greedy)

    def record(self, state: np.ndarray, action: int, reward: float, next_state: np.ndarray) -> None:
        item = (np.asarray(state, dtype=np.float64), int(action), float(reward), np.asarray(next_state, dtype=np.float64))
        self._seg.append(item)
        self._round.append(item)
        if len(self._seg) >= self.hyper.rollout_len:
            self._flush_segment()

    def set_params(self, params: ModelParams) -> None:
        """Adopt broadcast parameters; optimiser moments restart."""
        self.params = params.copy()
        self._adam_m = None
        self._adam_v = None
        self._adam_t = 0

    def end_round(self) -> tuple[Trajectory, float]:
        self._flush_segment()
        if not self._round:
            raise ValueError("end_round called with no recorded transitions")
        traj = _to_trajectory(self._round)
        self._round = []
        loss = scalar_loss(
            self.params,
            traj,
            self.hyper.gamma,
            self.hyper.k_steps,
            self.hyper.value_coef,
            self.hyper.entropy_coef,
        )
        return traj, loss

    def _flush_segment(self) -> None:
        if not self._seg:
            return
        traj = _to_trajectory(self._seg)
        self._seg = []
        self._apply_update(traj)

    def _apply_update(self, traj: Trajectory) -> None:
        h = self.hyper
        T = len(traj)
        adv = compute_advantages(traj, self.params.critic, h.gamma, h.k_steps).advantages

        probs, logp, _logp_a, entropy, actor_cache = _policy_terms(self.params.actor, traj)
        onehot = np.zeros_like(probs)
        onehot[np.arange(T), traj.actions] = 1.0
        d_entropy = -probs * (logp + entropy[:, None])
        # ascent direction on the policy objective + entropy bonus
        dlogits = (adv[:, None] * (onehot - probs) + h.entropy_coef * d_entropy) / T
        aw, ab = mlp_backward(self.params.actor, actor_cache, dlogits)

        _, critic_cache = mlp_forward(self.params.critic, traj.states)
        cw, cb = mlp_backward(self.params.critic, critic_cache, (adv / T)[:, None])

        parts = []
        for gw, gb in zip(aw, ab):
            parts.append(gw.ravel())
            parts.append(gb.ravel())
        for gw, gb in zip(cw, cb):
            parts.append(gw.ravel())
            parts.append(gb.ravel())
        direction = np.concatenate(parts)

        if h.grad_clip is not None:
            norm = float(np.linalg.norm(direction))
            if norm > h.grad_clip:
                direction *= h.grad_clip / norm

        flat = flatten_params(self.params)
        if h.optimizer == "sgd":
            flat = flat + h.lr * direction
        else:
            if self._adam_m is None:
                self._adam_m = np.zeros_like(flat)
                self._adam_v = np.zeros_like(flat)
            self._adam_t += 1
            self._adam_m = h.adam_beta1 * self._adam_m + (1 - h.adam_beta1) * direction
            self._adam_v = h.adam_beta2 * self._adam_v + (1 - h.adam_beta2) * direction * direction
            m_hat = self._adam_m / (1 - h.adam_beta1 ** self._adam_t)
            v_hat = self._adam_v / (1 - h.adam_beta2 ** self._adam_t)
            flat = flat + h.lr * m_hat / (np.sqrt(v_hat) + h.adam_eps)

        if not np.all(np.isfinite(flat)):
            raise DivergenceError(
                f"non-finite parameters after update {self.updates_applied + 1} "
                f"(|direction| = {np.linalg.norm(direction):.3g})"
            )
        self.params = unflatten_params(self.params, flat)
        self.updates_applied += 1


def _to_trajectory(items: list[tuple[np.ndarray, int, float, np.ndarray]]) -> Trajectory:
    return Trajectory(
        states=np.stack([it[0] for it in items]),
        actions=np.array([it[1] for it in items], dtype=np.int64),
        rewards=np.array([it[2] for it in items], dtype=np.float64),
        next_states=np.stack([it[3] for it in items]),
    )


def local_train(
    params: ModelParams,
    env: AgentEnv,
    n_steps: int,
    hyper: A2CHyper,
    rng: np.random.Generator | int,
) -> tuple[ModelParams, Trajectory, float]:
    """Run ``n_steps`` of interaction and learning on a single-agent env.

    Returns the updated parameters, the full trajectory and the surrogate
    loss of the returned parameters on it.  The input ``params`` object is
    never mutated.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    learner = A2CLearner(params, hyper, rng)
    obs = np.asarray(env.observe(), dtype=np.float64)
    for _ in range(n_steps):
        action = learner.act(obs)
        reward, nxt = env.step(action)
        nxt = np.asarray(nxt, dtype=np.float64)
        learner.record(obs, action, reward, nxt)
        obs = nxt
    traj, loss = learner.end_round()
    return learner.params, traj, loss
