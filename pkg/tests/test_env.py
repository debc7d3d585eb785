import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aosrl.config import ProcessConfig, UtilityWeights
from aosrl.env import (Action, AosEnv, SystemState, all_actions, encode_features, env_step,
                       evolve_aos, fit_scaler, infer, step_process, utility, with_process)

PC = ProcessConfig()
WTS = UtilityWeights()


def no_new_channels(state):
    return lambda: (state.amp_sr, state.amp_rd, None)


def good_state(cfg, c=3, y=1, X=2, X_hat=5):
    K = cfg.K
    return SystemState(c, y, X, X_hat, np.full(K, 1e-3), np.full(K, 1e-3))


class TestProcess:
    def test_absorbing(self, rng):
        pc = replace(PC, chi=1.0)
        assert all(step_process(4, pc, rng) == 4 for _ in range(200))

    def test_jump_probabilities(self, rng):
        n = 200_000
        counts = np.bincount([step_process(0, PC, rng) for _ in range(n)], minlength=9) / n
        assert counts[0] == pytest.approx(0.5, abs=0.005)
        np.testing.assert_allclose(counts[1:], 0.0625, atol=0.003)

    def test_stationary_uniform(self, rng):
        X, visits = 0, np.zeros(9)
        for _ in range(300_000):
            X = step_process(X, PC, rng)
            visits[X] += 1
        np.testing.assert_allclose(visits / visits.sum(), 1 / 9, atol=0.004)


class TestInference:
    def test_perfect(self, rng):
        pc = replace(PC, varphi=1.0)
        assert all(infer(3, pc, rng) == 3 for _ in range(200))

    def test_never(self, rng):
        pc = replace(PC, varphi=0.0)
        assert all(infer(3, pc, rng) != 3 for _ in range(500))

    def test_half(self, rng):
        hits = np.mean([infer(3, PC, rng) == 3 for _ in range(100_000)])
        assert hits == pytest.approx(0.5, abs=0.01)


class TestAos:
    def test_match_resets(self):
        assert evolve_aos(7, 2, 2, 30) == 0

    def test_mismatch_increments(self):
        assert evolve_aos(5, 2, 4, 30) == 6

    def test_cap(self):
        assert evolve_aos(30, 2, 4, 30) == 30

    @given(st.integers(0, 30), st.integers(0, 8), st.integers(0, 8))
    def test_two_case_rule(self, c, x, xh):
        assert evolve_aos(c, x, xh, 30) in (0, min(c + 1, 30))


class TestUtility:
    def test_idle_fresh(self):
        assert utility(0, 0, 0.0, WTS) == 1.0

    def test_stale(self):
        assert utility(10, 0, 0.0, WTS) == pytest.approx(0.60653, abs=1e-5)

    def test_energy(self):
        assert utility(0, 1, 0.09, WTS) == pytest.approx(0.90484, abs=1e-5)

    @given(st.integers(0, 30), st.sampled_from([0, 1]), st.floats(0, 2))
    def test_range_and_monotone(self, c, n, e):
        u = utility(c, n, e, WTS)
        assert 0 < u <= 1
        assert utility(c + 1, n, e, WTS) < u
        if n == 1:
            assert utility(c, n, e + 0.1, WTS) < u
        assert (u == 1.0) == (c == 0 and n == 0)


class TestActions:
    def test_space(self):
        acts = all_actions(5)
        assert len(acts) == 6
        assert acts[0] == Action(0, 0) and acts[3] == Action(1, 3)
        assert [a.index() for a in acts] == list(range(6))

    @pytest.mark.parametrize("n,m", [(1, 0), (0, 2), (2, 1), (1, -1)])
    def test_malformed(self, n, m):
        with pytest.raises(ValueError):
            Action(n, m)

    def test_step_rejects_raw_tuple(self, env_cfg, rng):
        s = good_state(env_cfg)
        with pytest.raises(TypeError):
            env_step(s, (1, 2), env_cfg, rng, no_new_channels(s))

    def test_step_rejects_unknown_relay(self, env_cfg, rng):
        s = good_state(env_cfg)
        with pytest.raises(ValueError):
            env_step(s, Action(1, 6), env_cfg, rng, no_new_channels(s))


class TestStep:
    def test_idle_and_fresh(self, env_cfg, rng):
        cfg = with_process(env_cfg, chi=1.0)
        s = good_state(cfg, c=0, X=4, X_hat=4)
        nxt, u, info = env_step(s, Action(0, 0), cfg, rng, no_new_channels(s))
        assert nxt.c == 0 and u == 1.0 and info.energy == 0.0 and nxt.y == s.y

    def test_feasible_sample_resets_aos(self, env_cfg, rng):
        cfg = with_process(env_cfg, chi=1.0, varphi=1.0)
        s = good_state(cfg, c=12, y=1)
        nxt, u, info = env_step(s, Action(1, 3), cfg, rng, no_new_channels(s))
        assert info.feasible and info.handover
        assert nxt.c == 0 and nxt.y == 3 and nxt.X_hat == nxt.X
        assert info.tau1 + info.tau2 + cfg.radio.delta == pytest.approx(cfg.radio.tau, abs=1e-15)
        assert info.energy == pytest.approx(cfg.weights.varrho + info.p * info.tau1)
        assert u == pytest.approx(math.exp(-(0.05 * 12 + info.energy)))

    def test_power_cap_fails_delivery(self, env_cfg, rng):
        cfg = with_process(env_cfg, chi=1.0, varphi=1.0)
        K = cfg.K
        s = SystemState(4, 2, 1, 6, np.full(K, 1e-14), np.full(K, 1e-3))
        nxt, _, info = env_step(s, Action(1, 2), cfg, rng, no_new_channels(s))
        assert not info.feasible and not info.handover
        assert info.p == cfg.radio.P
        assert info.energy == pytest.approx(cfg.weights.varrho + cfg.radio.P * info.tau1)
        assert nxt.X_hat == 6 and nxt.c == 5

    def test_no_time_charges_sampling_only(self, env_cfg, rng):
        cfg = with_process(env_cfg, chi=1.0)
        K = cfg.K
        s = SystemState(4, 2, 1, 6, np.full(K, 1e-3), np.full(K, 1e-14))
        nxt, _, info = env_step(s, Action(1, 4), cfg, rng, no_new_channels(s))
        assert not info.feasible and info.handover and nxt.y == 4
        assert info.energy == pytest.approx(cfg.weights.varrho)
        assert nxt.X_hat == 6

    def test_delivery_success_rate_is_varphi(self, env_cfg):
        cfg = with_process(env_cfg, chi=1.0, varphi=0.5)
        rng = np.random.default_rng(3)
        s = good_state(cfg, c=5, y=1)
        hits = 0
        n = 100_000
        draw = no_new_channels(s)
        for _ in range(n):
            nxt, _, info = env_step(s, Action(1, 1), cfg, rng, draw)
            assert info.feasible
            hits += nxt.c == 0
        assert hits / n == pytest.approx(0.5, abs=0.01)


class TestFeatures:
    def test_length(self, env_cfg):
        assert env_cfg.feature_dim == 16
        assert encode_features(good_state(env_cfg), env_cfg, fit_scaler(env_cfg)).shape == (16,)

    def test_aos_component(self, env_cfg):
        sc = fit_scaler(env_cfg)
        assert encode_features(good_state(env_cfg, c=0, X_hat=2), env_cfg, sc)[0] == 0.0
        assert encode_features(good_state(env_cfg, c=30), env_cfg, sc)[0] == 1.0

    def test_association_block(self, env_cfg):
        sc = fit_scaler(env_cfg)
        a = encode_features(good_state(env_cfg, y=1), env_cfg, sc)
        b = encode_features(good_state(env_cfg, y=4), env_cfg, sc)
        diff = np.flatnonzero(a != b)
        assert set(diff) == {1, 4}
        assert a[1:6].sum() == b[1:6].sum() == 1.0

    def test_scaler_standardises(self, env_cfg):
        env = AosEnv(env_cfg, seed=5)
        feats = np.array([env.features()[6:] for _ in range(1) for _ in [env.step(0)]])
        rows = []
        for _ in range(3000):
            env.step(0)
            rows.append(env.features()[6:])
        rows = np.array(rows)
        np.testing.assert_allclose(rows.mean(axis=0), 0.0, atol=0.1)
        np.testing.assert_allclose(rows.std(axis=0), 1.0, atol=0.1)
        assert feats.shape == (1, 10)


class TestRollouts:
    def test_invariants(self, env_cfg):
        env = AosEnv(env_cfg, seed=11)
        rng = np.random.default_rng(0)
        C = env_cfg.process.C
        for _ in range(3000):
            c = env.aos
            assert (c == 0) == (env.state.X_hat == env.state.X)
            u, _ = env.step(int(rng.integers(env.num_actions)))
            assert 0 < u <= 1
            assert env.aos in (0, min(c + 1, C))

    def test_channels_ignore_actions(self, env_cfg):
        e1, e2 = AosEnv(env_cfg, seed=21), AosEnv(env_cfg, seed=21)
        rng = np.random.default_rng(1)
        for _ in range(600):
            e1.step(0)
            e2.step(int(rng.integers(6)))
            assert np.array_equal(e1.state.amp_sr, e2.state.amp_sr)
            assert np.array_equal(e1.state.amp_rd, e2.state.amp_rd)

    def test_channel_independent_of_aos(self, env_cfg):
        # 2x2 contingency of (AoS above median) x (RS1 uplink above median), chi-square 1 dof
        env = AosEnv(env_cfg, seed=4)
        rng = np.random.default_rng(2)
        cs, amps = [], []
        for _ in range(20_000):
            env.step(int(rng.integers(6)))
            cs.append(env.aos)
            amps.append(env.state.amp_sr[0])
        hi_c = np.array(cs) > np.median(cs)
        hi_a = np.array(amps) > np.median(amps)
        table = np.array([[np.sum(hi_c & hi_a), np.sum(hi_c & ~hi_a)],
                          [np.sum(~hi_c & hi_a), np.sum(~hi_c & ~hi_a)]], dtype=float)
        expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / table.sum()
        stat = float(np.sum((table - expected) ** 2 / expected))
        p_value = math.erfc(math.sqrt(stat / 2))
        assert p_value > 0.001

    def test_seeded_determinism(self, env_cfg):
        def trace(seed):
            env = AosEnv(env_cfg, seed=seed)
            out = []
            for j in range(500):
                u, info = env.step(j % 6)
                out.append((u, info.energy, env.aos))
            return out
        assert trace(9) == trace(9)
        assert trace(9) != trace(10)
