"""Advantage estimation, the surrogate loss and its gradient, and learners."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfrl.agents import (
    A2CHyper,
    A2CLearner,
    CentralizedLearner,
    DivergenceError,
    Trajectory,
    compute_advantages,
    flatten_params,
    init_model,
    local_train,
    sample_action,
    scalar_loss,
    scalar_loss_grad,
    unflatten_params,
)


def linear_model(obs_dim: int, n_actions: int = 2):
    """Bias-free single-layer model whose weights tests can set by hand."""
    m = init_model(obs_dim=obs_dim, hidden=(), n_actions=n_actions, seed=0)
    m.actor.weights[0][:] = 0.0
    m.critic.weights[0][:] = 0.0
    return m


def onehot_traj(rewards, actions, value_index):
    """Trajectory over one-hot states e_0, e_1, ... chained in order."""
    T = len(rewards)
    eye = np.eye(value_index)
    return Trajectory(
        states=eye[:T],
        actions=np.array(actions),
        rewards=np.array(rewards, dtype=float),
        next_states=eye[1 : T + 1],
    )


class TestAdvantages:
    def test_one_step_matches_td_error(self):
        m = linear_model(obs_dim=3)
        m.critic.weights[0][:, 0] = [-2.0, -3.0, -5.0]  # V(e_i) by index
        traj = onehot_traj(rewards=[-1.0, -0.5], actions=[0, 1], value_index=3)
        est = compute_advantages(traj, m.critic, gamma=0.9, k_steps=1)
        assert est.advantages[0] == pytest.approx(-1.0 + 0.9 * -3.0 - -2.0)
        assert est.advantages[1] == pytest.approx(-0.5 + 0.9 * -5.0 - -3.0)

    def test_two_step_with_truncation(self):
        # hand-worked case: gamma 0.9, K = 2, rewards (-1, -1),
        # V(e0) = -2, V(e1) = -3, V(e2) = -5
        m = linear_model(obs_dim=3)
        m.critic.weights[0][:, 0] = [-2.0, -3.0, -5.0]
        traj = onehot_traj(rewards=[-1.0, -1.0], actions=[0, 0], value_index=3)
        est = compute_advantages(traj, m.critic, gamma=0.9, k_steps=2)
        # full two-step window from t=0
        assert est.advantages[0] == pytest.approx(-3.95)
        # window truncates to one step at t=1, bootstrapping on the final next state
        assert est.advantages[1] == pytest.approx(-1.0 + 0.9 * -5.0 - -3.0)

    def test_bootstrap_state_is_final_next_state(self):
        traj = onehot_traj(rewards=[-1.0], actions=[0], value_index=2)
        assert traj.states_ext.shape == (2, 2)
        assert np.array_equal(traj.states_ext[1], traj.next_states[0])

    @settings(max_examples=40, deadline=None)
    @given(
        reward=st.floats(-4.0, 0.0),
        gamma=st.floats(0.0, 0.99),
        k_steps=st.integers(1, 7),
        T=st.integers(1, 12),
    )
    def test_constant_reward_zero_critic_closed_form(self, reward, gamma, k_steps, T):
        m = linear_model(obs_dim=4)
        traj = Trajectory(
            states=np.ones((T, 4)),
            actions=np.zeros(T, dtype=int),
            rewards=np.full(T, reward),
            next_states=np.ones((T, 4)),
        )
        est = compute_advantages(traj, m.critic, gamma=gamma, k_steps=k_steps)
        for t in range(T):
            horizon = min(k_steps, T - t)
            expected = reward * sum(gamma**i for i in range(horizon))
            assert est.advantages[t] == pytest.approx(expected, abs=1e-12)

    def test_parameter_validation(self):
        m = linear_model(obs_dim=2)
        traj = onehot_traj(rewards=[-1.0], actions=[0], value_index=2)
        with pytest.raises(ValueError):
            compute_advantages(traj, m.critic, gamma=1.5, k_steps=1)
        with pytest.raises(ValueError):
            compute_advantages(traj, m.critic, gamma=0.9, k_steps=0)


class TestTrajectory:
    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            Trajectory(
                states=np.zeros((2, 3)),
                actions=np.zeros(2, dtype=int),
                rewards=np.zeros(2),
                next_states=np.zeros((2, 4)),
            )
        with pytest.raises(ValueError):
            Trajectory(
                states=np.zeros((2, 3)),
                actions=np.zeros(3, dtype=int),
                rewards=np.zeros(2),
                next_states=np.zeros((2, 3)),
            )

    def test_rejects_out_of_range_rewards(self):
        with pytest.raises(ValueError, match="rewards"):
            Trajectory(
                states=np.zeros((1, 2)),
                actions=np.zeros(1, dtype=int),
                rewards=np.array([-4.5]),
                next_states=np.zeros((1, 2)),
            )
        with pytest.raises(ValueError, match="rewards"):
            Trajectory(
                states=np.zeros((1, 2)),
                actions=np.zeros(1, dtype=int),
                rewards=np.array([0.5]),
                next_states=np.zeros((1, 2)),
            )


class TestScalarLoss:
    def test_closed_form_uniform_policy_zero_critic(self):
        # zero weights: pi is uniform over 2 actions, V identically 0,
        # so the advantage reduces to the discounted reward sum
        m = linear_model(obs_dim=4)
        rewards = [-1.0, -2.0, -0.5]
        traj = onehot_traj(rewards=rewards, actions=[0, 1, 0], value_index=4)
        gamma, k = 0.9, 2
        adv = []
        for t in range(3):
            horizon = min(k, 3 - t)
            adv.append(sum(gamma**i * rewards[t + i] for i in range(horizon)))
        log2 = np.log(2.0)
        expected = np.mean([log2 * a + 0.5 * a * a - 0.01 * log2 for a in adv])
        got = scalar_loss(m, traj, gamma=gamma, k_steps=k, value_coef=0.5, entropy_coef=0.01)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_is_pure_function_of_params(self):
        m = init_model(obs_dim=3, hidden=(4,), n_actions=2, seed=5)
        before = flatten_params(m)
        traj = onehot_traj(rewards=[-1.0, -2.0], actions=[1, 0], value_index=3)
        v1 = scalar_loss(m, traj, gamma=0.9, k_steps=3)
        v2 = scalar_loss(m, traj, gamma=0.9, k_steps=3)
        assert v1 == v2
        assert np.array_equal(flatten_params(m), before)

    def test_depends_on_critic_through_advantage(self):
        # moving only critic weights must change the loss: the policy term
        # reuses the advantage, which the critic defines
        m = init_model(obs_dim=3, hidden=(), n_actions=2, seed=2)
        traj = onehot_traj(rewards=[-1.0, -2.0], actions=[1, 0], value_index=3)
        base = scalar_loss(m, traj, gamma=0.9, k_steps=1, value_coef=0.0)
        m.critic.weights[0][:, 0] += 1.0
        moved = scalar_loss(m, traj, gamma=0.9, k_steps=1, value_coef=0.0)
        assert moved != pytest.approx(base)

    @pytest.mark.parametrize("activation", ["tanh", "relu"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradient_matches_central_finite_differences(self, activation, seed):
        rng = np.random.default_rng(seed)
        T, d = 6, 4
        traj = Trajectory(
            states=rng.normal(size=(T, d)),
            actions=rng.integers(0, 2, size=T),
            rewards=-4.0 * rng.random(T),
            next_states=rng.normal(size=(T, d)),
        )
        m = init_model(obs_dim=d, hidden=(5,), n_actions=2, activation=activation, seed=seed + 10)
        args = dict(gamma=0.9, k_steps=3, value_coef=0.5, entropy_coef=0.02)
        loss, grad = scalar_loss_grad(m, traj, **args)
        assert loss == pytest.approx(scalar_loss(m, traj, **args), abs=1e-12)
        flat = flatten_params(m)
        eps = 1e-6
        fd = np.empty_like(flat)
        for i in range(flat.size):
            up = flat.copy()
            up[i] += eps
            down = flat.copy()
            down[i] -= eps
            fd[i] = (
                scalar_loss(unflatten_params(m, up), traj, **args)
                - scalar_loss(unflatten_params(m, down), traj, **args)
            ) / (2 * eps)
        rel = np.max(np.abs(grad - fd)) / max(np.max(np.abs(grad)), 1e-12)
        assert rel < 1e-5


class TestSampling:
    def test_greedy_picks_argmax(self):
        m = linear_model(obs_dim=2)
        m.actor.weights[0][:] = [[0.0, 5.0], [0.0, 5.0]]
        rng = np.random.default_rng(0)
        assert sample_action(m, np.ones(2), rng, greedy=True) == 1

    def test_sampling_is_seed_deterministic(self):
        m = init_model(obs_dim=4, hidden=(8,), n_actions=2, seed=0)
        obs = np.ones(4)
        a = [sample_action(m, obs, np.random.default_rng(42)) for _ in range(5)]
        b = [sample_action(m, obs, np.random.default_rng(42)) for _ in range(5)]
        assert a == b

    def test_sampling_frequency_tracks_probability(self):
        m = linear_model(obs_dim=1)
        m.actor.weights[0][:] = [[0.0, 2.0]]  # p(a=1) = sigmoid(2) ~ 0.881
        rng = np.random.default_rng(7)
        draws = [sample_action(m, np.ones(1), rng) for _ in range(4000)]
        assert np.mean(draws) == pytest.approx(0.8808, abs=0.02)


class TestLearnerUpdates:
    def test_single_transition_update_matches_hand_rule(self):
        m = linear_model(obs_dim=2)
        m.actor.weights[0][:] = [[0.3, -0.2], [0.1, 0.4]]
        m.critic.weights[0][:, 0] = [0.2, -0.1]
        lr, gamma = 0.01, 0.5
        hyper = A2CHyper(lr=lr, gamma=gamma, k_steps=3, rollout_len=1, entropy_coef=0.0, grad_clip=None)
        learner = A2CLearner(m, hyper, rng=0)

        x = np.array([1.0, 2.0])
        nxt = np.array([0.5, 0.5])
        action, reward = 1, -1.0
        learner.record(x, action, reward, nxt)
        assert learner.updates_applied == 1

        logits = x @ np.array([[0.3, -0.2], [0.1, 0.4]])
        e = np.exp(logits - logits.max())
        pi = e / e.sum()
        v_x = 0.2 * 1.0 - 0.1 * 2.0
        v_n = 0.2 * 0.5 - 0.1 * 0.5
        adv = reward + gamma * v_n - v_x

        expect_wa = np.array([[0.3, -0.2], [0.1, 0.4]]) + lr * adv * np.outer(x, np.array([0.0, 1.0]) - pi)
        expect_ba = lr * adv * (np.array([0.0, 1.0]) - pi)
        expect_wc = np.array([[0.2], [-0.1]]) + lr * adv * x[:, None]
        expect_bc = lr * adv

        assert np.allclose(learner.params.actor.weights[0], expect_wa, atol=1e-14)
        assert np.allclose(learner.params.actor.biases[0], expect_ba, atol=1e-14)
        assert np.allclose(learner.params.critic.weights[0], expect_wc, atol=1e-14)
        assert learner.params.critic.biases[0][0] == pytest.approx(expect_bc, abs=1e-14)

    def test_updates_fire_every_rollout_len(self):
        m = init_model(obs_dim=2, hidden=(4,), n_actions=2, seed=0)
        hyper = A2CHyper(lr=1e-4, rollout_len=4)
        learner = A2CLearner(m, hyper, rng=0)
        obs = np.zeros(2)
        for _ in range(10):
            learner.record(obs, 0, -1.0, obs)
        assert learner.updates_applied == 2
        traj, loss = learner.end_round()
        assert learner.updates_applied == 3  # partial segment of 2 flushed
        assert len(traj) == 10
        assert np.isfinite(loss)

    def test_end_round_requires_transitions(self):
        m = init_model(obs_dim=2, hidden=(4,), n_actions=2, seed=0)
        learner = A2CLearner(m, A2CHyper(), rng=0)
        with pytest.raises(ValueError):
            learner.end_round()

    def test_grad_clip_caps_step_norm(self):
        m = init_model(obs_dim=2, hidden=(4,), n_actions=2, seed=0)
        clip = 1e-3
        hyper = A2CHyper(lr=1.0, rollout_len=1, grad_clip=clip, entropy_coef=0.0)
        learner = A2CLearner(m, hyper, rng=0)
        learner.record(np.array([5.0, -3.0]), 0, -4.0, np.array([1.0, 1.0]))
        step = flatten_params(learner.params) - flatten_params(m)
        assert np.linalg.norm(step) == pytest.approx(clip, rel=1e-9)

    def test_adam_first_step_is_lr_scaled_sign(self):
        m = init_model(obs_dim=2, hidden=(4,), n_actions=2, seed=0)
        lr = 0.003
        hyper = A2CHyper(lr=lr, rollout_len=1, optimizer="adam", grad_clip=None)
        learner = A2CLearner(m, hyper, rng=0)
        learner.record(np.array([1.0, -1.0]), 0, -2.0, np.array([0.5, 0.5]))
        step = flatten_params(learner.params) - flatten_params(m)
        moved = np.abs(step[np.abs(step) > 0])
        assert moved.size > 0
        assert np.max(moved) <= lr * (1 + 1e-9)
        assert np.max(moved) == pytest.approx(lr, rel=1e-3)

    def test_divergence_raises(self):
        m = init_model(obs_dim=2, hidden=(4,), n_actions=2, seed=0)
        hyper = A2CHyper(lr=1e200, rollout_len=1, grad_clip=None)
        learner = A2CLearner(m, hyper, rng=0)
        obs = np.array([1.0, 1.0])
        with pytest.raises(DivergenceError), np.errstate(over="ignore", invalid="ignore"):
            for _ in range(10):
                learner.record(obs, 0, -4.0, obs)

    def test_set_params_copies_and_resets_optimizer(self):
        m = init_model(obs_dim=2, hidden=(4,), n_actions=2, seed=0)
        hyper = A2CHyper(lr=1e-3, rollout_len=1, optimizer="adam")
        learner = A2CLearner(m, hyper, rng=0)
        learner.record(np.ones(2), 0, -1.0, np.ones(2))
        assert learner._adam_t == 1
        fresh = init_model(obs_dim=2, hidden=(4,), n_actions=2, seed=9)
        learner.set_params(fresh)
        assert learner._adam_t == 0
        fresh.actor.weights[0][:] = 123.0
        assert not np.any(learner.params.actor.weights[0] == 123.0)


class _ScriptedEnv:
    """Tiny deterministic environment for exercising local_train."""

    def __init__(self):
        self.t = 0

    def observe(self):
        return np.array([np.sin(self.t / 3.0), np.cos(self.t / 3.0)])

    def step(self, action):
        self.t += 1
        reward = -1.5 if action == 0 else -0.5
        return reward, self.observe()


class TestLocalTrain:
    def test_deterministic_given_seed(self):
        m = init_model(obs_dim=2, hidden=(8,), n_actions=2, seed=0)
        hyper = A2CHyper(lr=0.01, rollout_len=5)
        p1, t1, l1 = local_train(m, _ScriptedEnv(), 23, hyper, rng=42)
        p2, t2, l2 = local_train(m, _ScriptedEnv(), 23, hyper, rng=42)
        assert np.array_equal(flatten_params(p1), flatten_params(p2))
        assert np.array_equal(t1.actions, t2.actions)
        assert l1 == l2
        p3, _, _ = local_train(m, _ScriptedEnv(), 23, hyper, rng=43)
        assert not np.array_equal(flatten_params(p1), flatten_params(p3))

    def test_input_params_never_mutated_and_tiny_lr_is_identity(self):
        m = init_model(obs_dim=2, hidden=(8,), n_actions=2, seed=0)
        before = flatten_params(m)
        hyper = A2CHyper(lr=1e-300, rollout_len=5)
        out, traj, _ = local_train(m, _ScriptedEnv(), 17, hyper, rng=1)
        assert np.array_equal(flatten_params(m), before)
        # a vanishing learning rate leaves the parameters unchanged up to
        # additions below 1e-250 (exact zeros pick up the raw step)
        assert np.allclose(flatten_params(out), before, rtol=0.0, atol=1e-250)
        assert len(traj) == 17

    def test_learning_shifts_policy_toward_better_action(self):
        # action 1 always pays more; after training its probability rises
        m = init_model(obs_dim=2, hidden=(8,), n_actions=2, seed=0)
        hyper = A2CHyper(lr=0.05, gamma=0.9, rollout_len=10, entropy_coef=0.0)
        out, _, _ = local_train(m, _ScriptedEnv(), 400, hyper, rng=3)
        from hfrl.agents import action_probs

        obs = _ScriptedEnv().observe()
        assert action_probs(out, obs)[1] > action_probs(m, obs)[1]
        assert action_probs(out, obs)[1] > 0.6


class TestCentralized:
    def _make(self, hyper=None):
        names = ["B1", "A0", "C2"]
        return CentralizedLearner(
            agent_names=names,
            obs_dim=3,
            hyper=hyper or A2CHyper(lr=0.01, rollout_len=2),
            hidden=(8,),
            seed=5,
        )

    def test_names_sorted_and_actions_keyed(self):
        learner = self._make()
        assert learner.names == ["A0", "B1", "C2"]
        obs = {n: np.ones(3) * i for i, n in enumerate(learner.names)}
        acts = learner.act(obs)
        assert set(acts) == {"A0", "B1", "C2"}
        assert all(a in (0, 1) for a in acts.values())

    def test_greedy_deterministic(self):
        learner = self._make()
        obs = {n: np.full(3, 0.3) for n in learner.names}
        assert learner.act(obs, greedy=True) == learner.act(obs, greedy=True)

    def test_update_fires_after_rollout(self):
        learner = self._make()
        obs = {n: np.full(3, 0.2) for n in learner.names}
        acts = {n: 0 for n in learner.names}
        rews = {n: -1.0 for n in learner.names}
        learner.record(obs, acts, rews, obs)
        assert learner.updates_applied == 0
        learner.record(obs, acts, rews, obs)
        assert learner.updates_applied == 1

    def test_heads_are_independent_softmaxes(self):
        learner = self._make()
        joint = np.zeros(9)
        logp = learner._head_logprobs(joint)
        probs = np.exp(logp)[0]
        assert probs.shape == (3, 2)
        assert np.allclose(probs.sum(axis=1), 1.0)
