import numpy as np
import pytest

from aosrl.baselines import (a2c_grads, a2c_policy, a2c_train, cql_loss_grad, cql_penalty,
                             cql_policy, cql_train, make_a2c_trainer, make_cql_trainer,
                             random_policy, random_policy_probs)
from aosrl.config import A2CConfig, CQLConfig, NetConfig
from aosrl.dataset import Dataset
from aosrl.env import AosEnv
from aosrl.neural import actor_probs, backprop, forward, init_params
from aosrl.offline import penalty_terms
from aosrl.tabular import TabularEnv, TabularMdp, exact_policy_value, rollout_dataset
from conftest import toy_mdp


class TestRandom:
    def test_uniform_six(self):
        np.testing.assert_allclose(random_policy_probs(None, 6), 1 / 6)

    def test_state_independent(self, env_cfg):
        env = AosEnv(env_cfg, seed=0)
        pol = random_policy(env.num_actions)
        a = pol.probs(env.features())
        env.step(3)
        assert np.array_equal(a, pol.probs(env.features()))
        assert a.sum() == pytest.approx(1.0)

    def test_actions_cover_space(self, rng):
        pol = random_policy(6)
        counts = np.bincount([pol.act(None, rng) for _ in range(6000)], minlength=6)
        assert counts.min() > 850


def deterministic_mdp():
    # two states; action 1 in state 0 moves to the rewarding state 1
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[0, 1, 1] = P[1, 0, 0] = P[1, 1, 0] = 1.0
    u = np.array([[0.3, 0.4], [1.0, 1.0]])
    return TabularMdp(P, u, 0.9)


class TestA2C:
    def make(self, seed=0, ent=0.0, n_in=2, n_actions=2):
        cfg = A2CConfig(entropy_bonus=ent, net=NetConfig(hidden=16, lr_actor=1e-3,
                                                         lr_critic=1e-3))
        return make_a2c_trainer(n_in, n_actions, cfg, np.random.default_rng(seed))

    def test_learns_optimal_action(self):
        tr = self.make()
        a2c_train(TabularEnv(deterministic_mdp(), 0), tr, 5000, np.random.default_rng(0))
        assert actor_probs(tr.actor, np.array([1.0, 0.0]))[1] > 0.95

    def test_critic_is_state_value(self):
        tr = self.make()
        assert tr.critic.shape == (2, 16, 1)

    def test_positive_advantage_raises_action_prob(self):
        tr = self.make()
        s = np.array([1.0, 0.0])
        # V = 0 everywhere, so delta = u > 0
        tr.critic.W2[:] = 0.0
        _, ag, _, _, delta = a2c_grads(tr.actor, tr.critic, (s, 1, 0.5, s), 0.9, 0.0)
        assert delta == pytest.approx(0.5)
        p = actor_probs(tr.actor, s)
        # gradient of log pi(1) at the logits is e_1 - pi, so logits upstream is positive on 1
        assert ag.b2[1] > 0 and ag.b2[0] < 0 and p.sum() == pytest.approx(1.0)

    def test_seeded_determinism(self, env_cfg):
        def run():
            env = AosEnv(env_cfg, seed=3)
            tr = make_a2c_trainer(env.feature_dim, env.num_actions, A2CConfig(),
                                  np.random.default_rng(5))
            rows = a2c_train(env, tr, 300, np.random.default_rng(5), window=100)
            return rows, tr.actor
        assert run() == run()

    def test_policy_handle(self, env_cfg):
        tr = make_a2c_trainer(16, 6, A2CConfig(), np.random.default_rng(0))
        pol = a2c_policy(tr)
        x = np.zeros(16)
        assert pol.probs(x).shape == (6,) and pol.probs(x).sum() == pytest.approx(1.0)
        assert a2c_policy(tr, greedy=True).probs(x).max() == 1.0


class TestCQL:
    def test_penalty_value(self):
        val, _ = cql_penalty(np.array([0.0, 0.0]), 0)
        assert val[0] == pytest.approx(0.69315, abs=1e-5)

    def test_zero_weight_is_fitted_q(self, rng):
        q, target = init_params(4, 6, 3, rng), init_params(4, 6, 3, rng)
        s, s2 = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        a, u = rng.integers(3, size=5), rng.uniform(0.1, 1, 5)
        _, grads = cql_loss_grad(q, target, (s, a, u, s2), 0.9, 0.0)
        y = 0.1 * u + 0.9 * forward(target, s2)[0].max(axis=1)
        out, cache = forward(q, s)
        up = np.zeros_like(out)
        up[np.arange(5), a] = (out[np.arange(5), a] - y) / 5
        np.testing.assert_allclose(grads.flat(), backprop(q, cache, up).flat(), atol=1e-12,
                                   rtol=0)

    def test_penalty_is_softmax_part_of_offline_penalty(self, rng):
        q = rng.normal(size=(4, 3))
        a = rng.integers(3, size=4)
        lse = np.log(np.exp(q).sum(axis=1))
        cql, _ = cql_penalty(q, a)
        np.testing.assert_allclose(cql, lse - q[np.arange(4), a])
        # a very negative margin switches off the hinge, leaving only the logsumexp part
        off, _ = penalty_terms(q, a, 1.0, -100.0)
        np.testing.assert_allclose(off, lse)

    def test_greedy_policy(self, rng):
        tr = make_cql_trainer(4, 3, CQLConfig(), rng)
        tr.q.b2[:] = [0, 50, 0]
        tr.q.W2[:] = 0
        assert cql_policy(tr).act(np.zeros(4), rng) == 1

    def test_too_small_dataset(self, rng):
        tr = make_cql_trainer(2, 2, CQLConfig(batch_size=10), rng)
        ds = Dataset({"feature_dim": 2}, np.zeros((3, 2)), [0, 1, 0], [0.5] * 3, np.zeros((3, 2)))
        with pytest.raises(ValueError):
            cql_train(ds, tr, 1, rng)

    @pytest.mark.slow
    def test_toy_expert_data_beats_random(self):
        mdp = toy_mdp()
        behaviour = np.array([[0.2, 0.8], [0.2, 0.8], [0.8, 0.2]])
        tds = rollout_dataset(mdp, behaviour, 5000, np.random.default_rng(2))
        eye = np.eye(mdp.S)
        ds = Dataset({"feature_dim": mdp.S}, eye[tds.s], tds.a, tds.u, eye[tds.s2])
        cfg = CQLConfig(batch_size=256, net=NetConfig(hidden=16, lr_critic=3e-3))
        tr = make_cql_trainer(mdp.S, mdp.A, cfg, np.random.default_rng(0))
        cql_train(ds, tr, 1500, np.random.default_rng(1))
        greedy = np.eye(mdp.A)[forward(tr.q, eye)[0].argmax(axis=1)]
        uniform = np.full((mdp.S, mdp.A), 0.5)
        assert np.all(exact_policy_value(greedy, mdp) >= exact_policy_value(uniform, mdp))


@pytest.mark.parametrize("make", ["random", "a2c", "cql"])
def test_valid_distributions_over_all_actions(make, env_cfg, rng):
    env = AosEnv(env_cfg, seed=1)
    n = env.num_actions
    if make == "random":
        pol = random_policy(n)
    elif make == "a2c":
        pol = a2c_policy(make_a2c_trainer(env.feature_dim, n, A2CConfig(), rng))
    else:
        pol = cql_policy(make_cql_trainer(env.feature_dim, n, CQLConfig(), rng))
    for _ in range(20):
        p = pol.probs(env.features())
        assert p.shape == (n,) and np.all(p >= 0) and p.sum() == pytest.approx(1.0)
        env.step(pol.act(env.features(), rng))
