import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aosrl.tabular import (TabularDataset, TabularMdp, bellman_apply, empirical_policy,
                           exact_policy_value, exact_q, hoeffding_psi, iterative_policy_value,
                           lower_bound_experiment, margin_term, minimize_margin, omega_star,
                           random_mdp, random_policy_matrix, ranking_policy, rho_lower_bound,
                           rollout_dataset, sparse_behavior, tabular_offline_fqi,
                           verify_value_lower_bound)

finite_rows = arrays(float, st.integers(1, 6), elements=st.floats(-20, 20))


def single_state(u, gamma=0.9):
    return TabularMdp(np.ones((1, 1, 1)), np.array([[u]]), gamma)


def cycle_mdp():
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = P[1, 0, 0] = 1.0
    return TabularMdp(P, np.array([[1.0], [0.5]]), 0.9)


class TestMdp:
    def test_rejects_bad_kernel(self):
        with pytest.raises(ValueError):
            TabularMdp(np.full((1, 1, 1), 0.9), np.array([[0.5]]))

    def test_rejects_bad_utility(self):
        with pytest.raises(ValueError):
            TabularMdp(np.ones((1, 1, 1)), np.array([[0.0]]))


class TestBellman:
    def test_myopic(self, rng):
        mdp = random_mdp(4, 2, rng, gamma=0.0)
        Q = rng.normal(size=(4, 2))
        np.testing.assert_allclose(bellman_apply(Q, random_policy_matrix(4, 2, rng), mdp), mdp.u)

    def test_single_state_fixed_point(self):
        mdp = single_state(0.5)
        Q = np.zeros((1, 1))
        for _ in range(400):
            Q = bellman_apply(Q, np.ones((1, 1)), mdp)
        assert Q[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_contraction(self, rng):
        mdp = random_mdp(6, 3, rng)
        for _ in range(100):
            pi = random_policy_matrix(6, 3, rng)
            Q1, Q2 = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
            lhs = np.max(np.abs(bellman_apply(Q1, pi, mdp) - bellman_apply(Q2, pi, mdp)))
            assert lhs <= mdp.gamma * np.max(np.abs(Q1 - Q2)) + 1e-14


class TestPolicyValue:
    def test_single_state(self):
        assert exact_policy_value(np.ones((1, 1)), single_state(1.0))[0] == pytest.approx(1.0)
        for g in (0.0, 0.5, 0.99):
            assert exact_policy_value(np.ones((1, 1)), single_state(0.5, g))[0] == pytest.approx(0.5)

    def test_cycle(self):
        mdp = cycle_mdp()
        V = exact_policy_value(np.ones((2, 1)), mdp)
        np.testing.assert_allclose(V, iterative_policy_value(np.ones((2, 1)), mdp), atol=1e-10)
        # closed form: V0 = (1-g)(1 + g*0.5)/(1-g^2)
        assert V[0] == pytest.approx(0.1 * 1.45 / 0.19, abs=1e-12)

    @given(st.integers(0, 10_000))
    def test_matrix_matches_iteration(self, seed):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(5, 3, rng)
        pi = random_policy_matrix(5, 3, rng)
        V = exact_policy_value(pi, mdp)
        np.testing.assert_allclose(V, iterative_policy_value(pi, mdp), atol=1e-10)
        assert np.all((V > 0) & (V <= 1))
        np.testing.assert_allclose(bellman_apply(exact_q(pi, mdp), pi, mdp), exact_q(pi, mdp),
                                   atol=1e-12)


class TestEmpirical:
    def test_single_pair(self):
        pi_D, counts, seen = empirical_policy(TabularDataset(2, 2, [1], [0], [0.5], [0]))
        assert pi_D[1, 0] == 1.0 and counts.sum() == 1
        assert seen.tolist() == [False, True]
        np.testing.assert_allclose(pi_D[0], 0.5)

    def test_balanced(self):
        ds = TabularDataset(1, 2, [0, 0, 0, 0], [0, 1, 1, 0], [0.5] * 4, [0] * 4)
        np.testing.assert_allclose(empirical_policy(ds)[0], [[0.5, 0.5]])

    def test_counts_total(self, rng):
        mdp = random_mdp(4, 3, rng)
        ds = rollout_dataset(mdp, random_policy_matrix(4, 3, rng), 257, rng)
        assert empirical_policy(ds)[1].sum() == 257


class TestPenaltyIngredients:
    def test_omega_star(self):
        assert omega_star([0.0], [5.0])[0] == 0.0
        assert omega_star([0.5], [1.0])[0] == pytest.approx(0.5)
        assert omega_star([1.0], [0.0])[0] == pytest.approx(0.36788, abs=1e-5)

    def test_rho_bound(self):
        assert rho_lower_bound(1.0, [[1]], [[1.0]], [[0.0]]) == pytest.approx(1.0)
        assert rho_lower_bound(0.0, [[1]], [[1.0]], [[0.0]]) == 0.0
        assert rho_lower_bound(1.0, [[100]], [[1.0]], [[0.0]]) == pytest.approx(0.1)

    def test_hoeffding(self):
        assert hoeffding_psi(6, 3, 0.05) == pytest.approx(math.sqrt(math.log(720) / 2))
        with pytest.raises(ValueError):
            hoeffding_psi(6, 3, 0.0)

    def test_ranking_examples(self):
        np.testing.assert_allclose(ranking_policy([0.3, 0.3]), 0.5)
        assert ranking_policy([1.0, 0.0])[0] == pytest.approx(0.73106, abs=1e-5)

    @given(finite_rows, st.floats(-50, 50))
    def test_ranking_argmax_consistency(self, q, shift):
        if q.size > 1 and np.sort(q)[-1] - np.sort(q)[-2] < 1e-9:
            return
        assert np.argmax(ranking_policy(q)) == np.argmax(q)
        assert np.argmax(ranking_policy(q + shift)) == np.argmax(q)

    @given(finite_rows, st.data(), st.floats(0, 3))
    def test_zero_margin_means_dominance(self, q, data, nu):
        a = data.draw(st.integers(0, q.size - 1))
        q_min = minimize_margin(q, a, nu)
        assert margin_term(q_min, a, nu) == 0.0
        others = np.delete(q_min, a)
        if others.size:
            assert q_min[a] >= others.max() + nu

    def test_single_action_margin(self):
        assert margin_term([0.4], 0, 0.0) == 0.0


class TestFqi:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.mdp = random_mdp(6, 3, rng)
        self.pi = random_policy_matrix(6, 3, rng)
        self.ds = rollout_dataset(self.mdp, sparse_behavior(6, 3, rng), 300, rng)

    def test_zero_rho_known_is_exact(self):
        Q = tabular_offline_fqi(self.ds, self.pi, 0.0, 1.0, self.mdp, "known")
        np.testing.assert_allclose(Q, exact_q(self.pi, self.mdp), atol=1e-8)

    def test_penalty_lowers_dataset_pairs(self):
        base = tabular_offline_fqi(self.ds, self.pi, 0.0, 1.0, self.mdp, "known")
        pen = tabular_offline_fqi(self.ds, self.pi, 5e-4, 1.0, self.mdp, "known")
        mask = empirical_policy(self.ds)[1] > 0
        assert np.all(pen[mask] <= base[mask] + 1e-12)

    def test_empty_and_bad_mode(self):
        empty = TabularDataset(6, 3, [], [], [], [])
        with pytest.raises(ValueError):
            tabular_offline_fqi(empty, self.pi, 0.0, 1.0, self.mdp)
        with pytest.raises(ValueError):
            tabular_offline_fqi(self.ds, self.pi, 0.0, 1.0, self.mdp, "guess")


class TestLowerBound:
    def test_known_mode_no_violations(self):
        rep = lower_bound_experiment(range(20), "known", rho=5e-4)
        assert rep["violations"] == 0 and rep["psi"] == 0.0

    def test_zero_rho_known_is_tight(self):
        rep = lower_bound_experiment(range(5), "known", rho=0.0)
        for row in rep["per_seed"]:
            slack = np.array(row["slack"])[row["dataset_states"]]
            assert np.max(np.abs(slack)) < 1e-8

    def test_sampled_mode_rate(self):
        rep = lower_bound_experiment(range(20), "sampled", rho=None)
        assert rep["violation_rate"] <= 0.05
        assert rep["rho_used"] >= rep["rho_bound"] > 0

    def test_below_bound_rejected(self):
        rng = np.random.default_rng(0)
        mdp = random_mdp(6, 3, rng)
        ds = rollout_dataset(mdp, sparse_behavior(6, 3, rng), 300, rng)
        with pytest.raises(ValueError):
            verify_value_lower_bound(mdp, random_policy_matrix(6, 3, rng), [ds], 0.0, "sampled")

    def test_unpenalised_sampled_fit_violates_often(self):
        # sampling error alone breaks the bound, so the sampled check is not vacuous
        rng = np.random.default_rng(0)
        mdp = random_mdp(6, 3, rng)
        bad = total = 0
        for _ in range(10):
            ds = rollout_dataset(mdp, sparse_behavior(6, 3, rng), 300, rng)
            pi = random_policy_matrix(6, 3, rng)
            seen = empirical_policy(ds)[2]
            V_hat = np.sum(pi * tabular_offline_fqi(ds, pi, 0.0, 1.0, mdp, "sampled"), axis=1)
            bad += int(np.sum((V_hat > exact_policy_value(pi, mdp))[seen]))
            total += int(seen.sum())
        assert bad / total > 0.2

    def test_report_fields(self):
        rep = lower_bound_experiment(range(2), "known")
        assert {"violation_rate", "rho_used", "rho_bound", "per_seed", "psi_rule"} <= set(rep)
        assert {"V", "V_hat", "slack"} <= set(rep["per_seed"][0])
