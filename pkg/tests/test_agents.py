import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diverse_dqn.agents import (Agent, AgentConfig, epsilon_at, q_ens, q_min, records_from_csv,
                                records_to_csv, train)
from diverse_dqn.environments import CatcherLite
from diverse_dqn.replay import Batch

REG_KINDS = ["atkinson", "gini", "theil", "vol", "meanvector"]


def linear_agent(algorithm="maxmin", n=2, **kw):
    """Agent with bias-only-relevant linear nets on a 1-d zero input."""
    cfg = AgentConfig(algorithm=algorithm, n_members=n, hidden=(), **kw)
    return Agent(cfg, obs_dim=1, n_actions=2, seed=0)


def set_outputs(net, values):
    net.params[0].data[...] = 0.0
    net.params[1].data[...] = np.asarray(values, dtype=float)[None, :]


def batch_of(r, done, n=1):
    return Batch(np.zeros((n, 1)), np.zeros(n, dtype=int), np.full(n, float(r)),
                 np.zeros((n, 1)), np.full(n, done))


class TestProxies:
    def test_q_min(self):
        np.testing.assert_array_equal(q_min(np.array([[1.0, 5.0], [2.0, 3.0]])), [1.0, 3.0])
        one = np.array([[4.0, -1.0]])
        np.testing.assert_array_equal(q_min(one), one[0])

    def test_q_ens(self):
        np.testing.assert_array_equal(q_ens(np.array([[1.0, 5.0], [3.0, 3.0]])), [2.0, 4.0])
        one = np.array([[4.0, -1.0]])
        np.testing.assert_array_equal(q_ens(one), one[0])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 10_000))
    def test_ordering(self, n, seed):
        values = np.random.default_rng(seed).normal(size=(n, 4, 3))
        lo, mid, hi = q_min(values), q_ens(values), values.max(axis=0)
        assert np.all(lo <= values + 1e-12)
        assert np.all(lo <= mid + 1e-12) and np.all(mid <= hi + 1e-12)


class TestActionSelection:
    def test_uniform_under_full_exploration(self):
        agent = linear_agent()
        counts = np.bincount([agent.select_action(np.zeros(1), 1.0) for _ in range(100_000)], minlength=2)
        np.testing.assert_allclose(counts / 100_000, 0.5, atol=0.02)

    def test_lowest_index_tie_break(self):
        cfg = AgentConfig(algorithm="dqn", hidden=())
        agent = Agent(cfg, obs_dim=1, n_actions=3, seed=0)
        set_outputs(agent.members[0], [0.0, 7.0, 7.0])
        assert agent.select_action(np.zeros(1), 0.0) == 1
        set_outputs(agent.members[0], [100.0, 107.0, 107.0])
        assert agent.select_action(np.zeros(1), 0.0) == 1

    def test_maxmin_acts_on_minimum(self):
        agent = linear_agent()
        set_outputs(agent.members[0], [1.0, 5.0])
        set_outputs(agent.members[1], [2.0, 0.5])
        assert agent.select_action(np.zeros(1), 0.0) == 0
        ens = linear_agent("ensemble")
        set_outputs(ens.members[0], [1.0, 5.0])
        set_outputs(ens.members[1], [2.0, 0.5])
        assert ens.select_action(np.zeros(1), 0.0) == 1

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            linear_agent().select_action(np.zeros(1), 1.5)


class TestTargets:
    def test_terminal_masks_bootstrap(self):
        agent = linear_agent()
        for t in agent.targets:
            set_outputs(t, [10.0, 10.0])
        assert agent.compute_target(batch_of(-1.0, True))[0] == -1.0

    def test_gamma_zero(self):
        agent = linear_agent(gamma=0.0)
        for t in agent.targets:
            set_outputs(t, [10.0, 10.0])
        assert agent.compute_target(batch_of(0.3, False))[0] == 0.3

    def test_maxmin_hand_example(self):
        agent = linear_agent(gamma=0.99)
        set_outputs(agent.targets[0], [1.0, 5.0])
        set_outputs(agent.targets[1], [2.0, 3.0])
        assert agent.compute_target(batch_of(0.0, False))[0] == pytest.approx(2.97)

    def test_ensemble_uses_mean(self):
        agent = linear_agent("ensemble", gamma=0.5)
        set_outputs(agent.targets[0], [1.0, 5.0])
        set_outputs(agent.targets[1], [3.0, 3.0])
        assert agent.compute_target(batch_of(1.0, False))[0] == pytest.approx(1.0 + 0.5 * 4.0)

    def test_targets_use_target_networks(self):
        agent = linear_agent(gamma=1.0)
        for m in agent.members:
            set_outputs(m, [100.0, 100.0])
        for t in agent.targets:
            set_outputs(t, [1.0, 2.0])
        assert agent.compute_target(batch_of(0.0, False))[0] == 2.0

    def test_double_dqn_hand_example(self):
        agent = linear_agent("ddqn", gamma=0.5)
        set_outputs(agent.members[0], [3.0, 1.0])   # online argmax -> action 0
        set_outputs(agent.targets[0], [1.5, 9.0])
        assert agent.compute_target(batch_of(1.0, False))[0] == pytest.approx(1.75)
        assert agent.compute_target(batch_of(1.0, True))[0] == 1.0

    def test_double_dqn_equals_dqn_when_nets_match(self):
        dd = Agent(AgentConfig(algorithm="ddqn", hidden=(8,), gamma=0.9), 3, 3, seed=4)
        dq = Agent(AgentConfig(algorithm="dqn", hidden=(8,), gamma=0.9), 3, 3, seed=4)
        rng = np.random.default_rng(0)
        b = Batch(rng.random((6, 3)), rng.integers(3, size=6), rng.normal(size=6), rng.random((6, 3)),
                  np.array([0, 0, 1, 0, 1, 0], dtype=bool))
        np.testing.assert_allclose(dd.compute_target(b), dq.compute_target(b), rtol=0, atol=1e-14)


def random_batch(seed=0, n=16, obs_dim=3, n_actions=3):
    rng = np.random.default_rng(seed)
    return Batch(rng.random((n, obs_dim)), rng.integers(n_actions, size=n), rng.normal(size=n),
                 rng.random((n, obs_dim)), rng.random(n) < 0.2)


class TestUpdate:
    def test_lambda_zero_matches_unregularized(self):
        base = Agent(AgentConfig(n_members=3, hidden=(8, 8)), 3, 3, seed=1)
        reg = Agent(AgentConfig(n_members=3, hidden=(8, 8), regularizer="theil", lam=0.0), 3, 3, seed=1)
        for step in range(20):
            b = random_batch(step)
            assert base.update_member(step % 3, b) == reg.update_member(step % 3, b)
        for mb, mr in zip(base.members, reg.members):
            np.testing.assert_array_equal(mb.get_flat(), mr.get_flat())

    @pytest.mark.parametrize("kind", REG_KINDS)
    def test_identical_members_zero_term_and_gradient(self, kind):
        cfg = AgentConfig(n_members=2, hidden=(4,), regularizer=kind, lam=0.3, seed_policy="identical_layers")
        agent = Agent(cfg, 3, 3, seed=2)
        norms = agent.norms()
        assert norms[0] == norms[1]
        assert agent.reg.value(norms, 0) == pytest.approx(0.0, abs=1e-15)
        assert agent.reg.grad(norms, 0) == pytest.approx(0.0, abs=1e-15)
        # so the regularised gradient equals the plain TD gradient
        b = random_batch(3)
        target = agent.compute_target(b)
        total, _, _ = agent.loss(0, b, target)
        agent.members[0].zero_grad()
        from diverse_dqn import autodiff as ad
        ad.backward(total)
        reg_grads = [p.grad.copy() for p in agent.members[0].params]
        plain = Agent(AgentConfig(n_members=2, hidden=(4,), seed_policy="identical_layers"), 3, 3, seed=2)
        t2, _, _ = plain.loss(0, b, target)
        ad.backward(t2)
        for g1, p in zip(reg_grads, plain.members[0].params):
            np.testing.assert_allclose(g1, p.grad, atol=1e-15)

    @pytest.mark.parametrize("kind", REG_KINDS)
    @pytest.mark.parametrize("unsquared", [False, True])
    def test_total_loss_gradient_finite_differences(self, kind, unsquared):
        from diverse_dqn import autodiff as ad
        # 2 members, 4 parameters each: linear net 1 -> 2
        cfg = AgentConfig(n_members=2, hidden=(), regularizer=kind, lam=0.7, unsquared_norm=unsquared)
        agent = Agent(cfg, obs_dim=1, n_actions=2, seed=5)
        rng = np.random.default_rng(9)
        b = Batch(rng.normal(size=(8, 1)), rng.integers(2, size=8), rng.normal(size=8),
                  rng.normal(size=(8, 1)), np.zeros(8, dtype=bool))
        target = agent.compute_target(b)
        member = agent.members[1]
        total, _, _ = agent.loss(1, b, target)
        member.zero_grad()
        ad.backward(total)
        analytic = np.concatenate([p.grad.ravel() for p in member.params])
        h = 1e-5
        numeric = []
        for p in member.params:
            for idx in np.ndindex(p.shape):
                old = p.data[idx]
                p.data[idx] = old + h
                f_plus = agent.loss(1, b, target)[0].item()
                p.data[idx] = old - h
                f_minus = agent.loss(1, b, target)[0].item()
                p.data[idx] = old
                numeric.append((f_plus - f_minus) / (2 * h))
        numeric = np.array(numeric)
        assert len(numeric) == 4
        assert np.max(np.abs(analytic - numeric)) / np.max(np.abs(numeric)) < 1e-5

    def test_only_selected_member_changes(self):
        agent = Agent(AgentConfig(n_members=3, hidden=(8,), regularizer="gini", lam=1e-3), 3, 3, seed=0)
        before = [m.get_flat() for m in agent.members]
        agent.update_member(1, random_batch())
        after = [m.get_flat() for m in agent.members]
        assert np.array_equal(before[0], after[0]) and np.array_equal(before[2], after[2])
        assert not np.array_equal(before[1], after[1])


class TestTraining:
    def cfg(self, **kw):
        base = dict(algorithm="maxmin", n_members=2, hidden=(16,), exploration_steps=50,
                    batch_size=8, target_sync=25, eval_episodes=2)
        base.update(kw)
        return AgentConfig(**base)

    def test_zero_steps(self):
        agent = Agent(self.cfg(), 3, 3, seed=0)
        before = [m.get_flat() for m in agent.members]
        assert train(agent, CatcherLite(seed=0), 0, 10, CatcherLite(seed=1)) == []
        for b, m in zip(before, agent.members):
            np.testing.assert_array_equal(b, m.get_flat())

    def test_deterministic(self):
        def run():
            agent = Agent(self.cfg(regularizer="vol", lam=1e-4), 3, 3, seed=7)
            return records_to_csv(train(agent, CatcherLite(seed=1), 400, 100, CatcherLite(seed=2)), 2)
        assert run() == run()

    def test_one_member_per_step_and_target_sync(self):
        agent = Agent(self.cfg(n_members=3), 3, 3, seed=3)
        env = CatcherLite(seed=0)
        state = {"m": [m.get_flat() for m in agent.members], "t": [t.get_flat() for t in agent.targets]}
        changes = []

        orig = agent.update_member

        def spy(i, batch):
            loss = orig(i, batch)
            now = [m.get_flat() for m in agent.members]
            changed = [k for k in range(3) if not np.array_equal(now[k], state["m"][k])]
            assert changed == [i]
            tnow = [t.get_flat() for t in agent.targets]
            synced = any(not np.array_equal(a, b) for a, b in zip(tnow, state["t"]))
            assert synced == (agent.updates % agent.config.target_sync == 0)
            state["m"], state["t"] = now, tnow
            changes.append(i)
            return loss

        agent.update_member = spy
        train(agent, env, 200, 0)
        assert len(changes) == 150

    def test_records(self):
        agent = Agent(self.cfg(regularizer="gini", lam=1e-3), 3, 3, seed=0)
        recs = train(agent, CatcherLite(seed=0), 300, 100, CatcherLite(seed=1))
        assert [r.step for r in recs] == [100, 200, 300]
        assert all(len(r.norms) == 2 for r in recs)
        text = records_to_csv(recs, 2)
        assert text.splitlines()[0] == "step,return_mean,return_std,loss,reg_value,l2_norm_1,l2_norm_2"
        assert records_from_csv(text) == recs

    def test_epsilon_schedule(self):
        cfg = AgentConfig(exploration_steps=100)
        assert epsilon_at(cfg, 50, 10_000) == 1.0
        assert epsilon_at(cfg, 100, 10_000) == 1.0
        assert epsilon_at(cfg, 600, 10_000) == pytest.approx(1.0 - 0.5 * 0.99)
        assert epsilon_at(cfg, 5_000, 10_000) == pytest.approx(0.01)


def test_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(algorithm="sarsa")
    with pytest.raises(ValueError):
        AgentConfig(gamma=1.5)
    with pytest.raises(ValueError):
        AgentConfig(lam=-1.0)
    with pytest.raises(ValueError):
        AgentConfig(algorithm="dqn", regularizer="gini")
    assert AgentConfig(algorithm="dqn", n_members=4).n_members == 1
