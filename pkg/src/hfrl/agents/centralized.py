"""Single joint controller over every intersection at once.

One actor-critic network sees the concatenation of all local observations
(agents in sorted name order) and emits one logit pair per intersection;
each pair is softmaxed independently, so the joint policy factorises as a
product of per-intersection Bernoulli-style choices.  The critic scores
the joint state and the reward is the mean of the local rewards, which
keeps it on the same [-4, 0] scale the local learners use.

Updates mirror the decentralized learner exactly: K-step advantages, the
same ascent rules, the same clipping and optimisers.  The point of this
controller is the communication pattern it implies (every observation up,
every action back down each step), not a different learning algorithm.
"""

from __future__ import annotations

import numpy as np

from .a2c import A2CHyper, DivergenceError
from .networks import (
    ModelParams,
    flatten_params,
    init_model,
    mlp_backward,
    mlp_forward,
    unflatten_params,
)


def joint_observation(obs: dict[str, np.ndarray], names: list[str]) -> np.ndarray:
    return np.concatenate([np.asarray(obs[n], dtype=np.float64) for n in names])


class CentralizedLearner:
    """Joint-policy learner over a fixed, sorted set of agent names."""

    def __init__(
        self,
        agent_names: list[str],
        obs_dim: int,
        hyper: A2CHyper,
        hidden: tuple[int, ...] = (64, 64),
        activation: str = "tanh",
        seed: int = 0,
        n_actions: int = 2,
    ):
        self.names = sorted(agent_names)
        self.n_agents = len(self.names)
        self.n_actions = n_actions
        self.obs_dim = obs_dim
        self.hyper = hyper
        self.rng = np.random.default_rng(seed)
        self.params: ModelParams = init_model(
            obs_dim=obs_dim * self.n_agents,
            hidden=hidden,
            n_actions=n_actions * self.n_agents,
            activation=activation,
            seed=seed,
        )
        self.updates_applied = 0
        self._seg: list[tuple[np.ndarray, np.ndarray, float, np.ndarray]] = []
        self._adam_m: np.ndarray | None = None
        self._adam_v: np.ndarray | None = None
        self._adam_t = 0

    # -- policy ---------------------------------------------------------

    def _head_logprobs(self, joint: np.ndarray) -> np.ndarray:
        """(B, n_agents, n_actions) log-probs with an independent softmax per head."""
        x = np.atleast_2d(joint)
        logits, _ = mlp_forward(self.params.actor, x)
        z = logits.reshape(x.shape[0], self.n_agents, self.n_actions)
        z = z - z.max(axis=2, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=2, keepdims=True))

    def act(self, obs: dict[str, np.ndarray], greedy: bool = False) -> dict[str, int]:
        joint = joint_observation(obs, self.names)
        probs = np.exp(self._head_logprobs(joint))[0]
        actions: dict[str, int] = {}
        for i, name in enumerate(self.names):
            p = probs[i]
            if greedy:
                actions[name] = int(np.argmax(p))
            else:
                u = self.rng.random()
                actions[name] = int(np.searchsorted(np.cumsum(p), u, side="right").clip(0, p.size - 1))
        return actions

    # -- learning -------------------------------------------------------

    def record(
        self,
        obs: dict[str, np.ndarray],
        actions: dict[str, int],
        rewards: dict[str, float],
        next_obs: dict[str, np.ndarray],
    ) -> None:
        self._seg.append(
            (
                joint_observation(obs, self.names),
                np.array([actions[n] for n in self.names], dtype=np.int64),
                float(np.mean([rewards[n] for n in self.names])),
                joint_observation(next_obs, self.names),
            )
        )
        if len(self._seg) >= self.hyper.rollout_len:
            self.flush()

    def flush(self) -> None:
        """Apply one update over the buffered segment, if any."""
        if not self._seg:
            return
        states = np.stack([it[0] for it in self._seg])
        actions = np.stack([it[1] for it in self._seg])
        rewards = np.array([it[2] for it in self._seg])
        next_states = np.stack([it[3] for it in self._seg])
        self._seg = []
        self._apply_update(states, actions, rewards, next_states)

    def _apply_update(
        self,
        states: np.ndarray,
        actions: np.ndarray,
        rewards: np.ndarray,
        next_states: np.ndarray,
    ) -> None:
        h = self.hyper
        T = states.shape[0]
        ext = np.vstack([states, next_states[-1:]])
        values = mlp_forward(self.params.critic, ext)[0].ravel()
        targets = np.empty(T)
        for t in range(T):
            horizon = min(h.k_steps, T - t)
            acc, g = 0.0, 1.0
            for i in range(horizon):
                acc += g * rewards[t + i]
                g *= h.gamma
            targets[t] = acc + g * values[t + horizon]
        adv = targets - values[:T]

        logits, actor_cache = mlp_forward(self.params.actor, states)
        z = logits.reshape(T, self.n_agents, self.n_actions)
        z = z - z.max(axis=2, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=2, keepdims=True))
        probs = np.exp(logp)
        entropy = -(probs * logp).sum(axis=2)  # (T, n_agents)

        onehot = np.zeros_like(probs)
        idx_t = np.repeat(np.arange(T), self.n_agents)
        idx_n = np.tile(np.arange(self.n_agents), T)
        onehot[idx_t, idx_n, actions.ravel()] = 1.0

        d_entropy = -probs * (logp + entropy[:, :, None])
        dheads = (adv[:, None, None] * (onehot - probs) + h.entropy_coef * d_entropy) / T
        aw, ab = mlp_backward(self.params.actor, actor_cache, dheads.reshape(T, -1))

        _, critic_cache = mlp_forward(self.params.critic, states)
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
            raise DivergenceError(f"non-finite parameters after update {self.updates_applied + 1}")
        self.params = unflatten_params(self.params, flat)
        self.updates_applied += 1
