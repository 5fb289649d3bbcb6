import numpy as np
import pytest

import mfgsolve as m
from mfgsolve import rng as rngmod
from mfgsolve.core import mean_field, prescription, softmax_prescription
from mfgsolve.envs import EnvModel
from mfgsolve.rl import estimate_mean_field_step


def uniform_gamma():
    return prescription([[0.5, 0.5], [0.5, 0.5]])


class TestExpectedSarsaBatch:
    def test_single_update_arithmetic(self, malware, grid_m50):
        # q = 0, alpha = 0.1, deterministic target G = -1.2 -> q = -0.12
        cfg = m.RlConfig(batch_size=1, sarsa_alpha=0.1)
        v0 = np.zeros((grid_m50.n_points, 2))
        q = m.expected_sarsa_batch(mean_field([0.5, 0.5]), uniform_gamma(),
                                   v0, malware, np.zeros((2, 2)), cfg,
                                   rngmod.stream(0, 0), grid=grid_m50)
        assert q[1, 1] == pytest.approx(-0.12, abs=1e-15)
        assert q[0, 1] == pytest.approx(-0.05, abs=1e-15)

    def test_alpha_one_overwrites_deterministic_pairs(self, malware,
                                                      grid_m50):
        # repair transitions are deterministic: one sweep pins Q[x, 1]
        # to R(x, 1, z) + discount * V'(z', healthy)
        rng = np.random.default_rng(8)
        v_next = rng.normal(size=(grid_m50.n_points, 2))
        z = mean_field([0.25, 0.75])
        gamma = uniform_gamma()
        cfg = m.RlConfig(batch_size=1, sarsa_alpha=1.0)
        q = m.expected_sarsa_batch(z, gamma, v_next, malware,
                                   np.full((2, 2), 123.0), cfg,
                                   rngmod.stream(0, 1), grid=grid_m50)
        z_next = m.propagate_mean_field(z, gamma, malware.kernel_tensor(z))
        v_healthy = m.interpolate_value(v_next, z_next, 0, grid_m50)
        for x in (0, 1):
            expected = malware.reward(x, 1, z) + 0.9 * v_healthy
            assert q[x, 1] == pytest.approx(expected, abs=1e-12)

    def test_terminal_batch_close_to_exact(self, malware, grid_m50):
        # v_next = 0 makes every target deterministic
        cfg = m.RlConfig(batch_size=2000, sarsa_alpha=0.1)
        v0 = np.zeros((grid_m50.n_points, 2))
        for g in (0, 25, 50):
            z = grid_m50.points[g]
            gamma = uniform_gamma()
            q = m.expected_sarsa_batch(z, gamma, v0, malware,
                                       np.zeros((2, 2)), cfg,
                                       rngmod.stream(0, 2, g), grid=grid_m50)
            q_exact = m.stage_q(z, gamma, v0, grid_m50, malware)
            assert np.abs(q - q_exact).max() <= 0.01

    def test_pair_order_invariance_via_independent_streams(self, malware,
                                                           grid_m50,
                                                           exact_m50):
        # oracle: scalar recursion consuming the same per-pair streams in
        # reversed pair order must reproduce the batch exactly
        cfg = m.RlConfig(batch_size=64, sarsa_alpha=0.3, tail_average=False)
        v_next = exact_m50["tables"][30].v
        z = grid_m50.points[20]
        gamma = uniform_gamma()
        z_next = m.propagate_mean_field(z, gamma, malware.kernel_tensor(z))
        parent = rngmod.stream(0, 3)
        q = m.expected_sarsa_batch(z, gamma, v_next, malware,
                                   np.zeros((2, 2)), cfg,
                                   parent, grid=grid_m50, z_next=z_next)

        streams = rngmod.stream(0, 3).spawn(4)
        v_bar = np.array([m.interpolate_value(v_next, z_next, x, grid_m50)
                          for x in range(2)])
        q_oracle = np.zeros((2, 2))
        for p in (3, 2, 1, 0):  # reversed pair order
            x, a = divmod(p, 2)
            draws = malware.sample_many(x, a, z, cfg.batch_size, streams[p])
            val = 0.0
            for nxt in draws:
                g_target = malware.reward(x, a, z) + 0.9 * v_bar[nxt]
                val = (1.0 - cfg.sarsa_alpha) * val + cfg.sarsa_alpha * g_target
            q_oracle[x, a] = val
        np.testing.assert_array_equal(q, q_oracle)

    def test_tail_average_reduces_noise(self, malware, grid_m50, exact_m50):
        v_next = exact_m50["tables"][30].v
        z = grid_m50.points[25]
        gamma = exact_m50["atlas"].probs[30][25]
        q_exact = m.stage_q(z, gamma, v_next, grid_m50, malware)

        def spread(tail_average, trials=20):
            cfg = m.RlConfig(batch_size=2000, sarsa_alpha=0.1,
                             tail_average=tail_average)
            errs = []
            for s in range(trials):
                q = m.expected_sarsa_batch(z, gamma, v_next, malware,
                                           np.zeros((2, 2)), cfg,
                                           rngmod.stream(s, 4), grid=grid_m50)
                errs.append(np.abs(q - q_exact).max())
            return float(np.mean(errs))

        assert spread(True) < 0.5 * spread(False)


class TestPolicyGradient:
    def test_equal_rows_are_stationary(self):
        cfg = m.RlConfig()
        logits = np.array([[0.3, 0.3], [-1.0, -1.0]])
        out = m.policy_gradient(np.array([[2.0, 2.0], [0.5, 0.5]]), logits,
                                cfg)
        np.testing.assert_array_equal(out, logits)

    def test_ascends_toward_better_action(self):
        q = np.array([[0.0, -0.5]])
        cfg = m.RlConfig(pg_steps=5, pg_lr=0.5)
        logits = np.zeros((1, 2))
        js, mass = [], []
        for _ in range(80):
            logits = m.policy_gradient(q, logits, cfg)
            p = softmax_prescription(logits)
            js.append(m.pg_objective(logits, q))
            mass.append(p[0, 0])
        assert all(b >= a - 1e-12 for a, b in zip(js, js[1:]))
        assert all(b >= a - 1e-12 for a, b in zip(mass, mass[1:]))
        assert mass[-1] > 0.99

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        h = 1e-5
        for _ in range(20):
            n_x = int(rng.integers(1, 4))
            n_a = int(rng.integers(2, 5))
            logits = rng.normal(scale=2.0, size=(n_x, n_a))
            q = rng.normal(scale=2.0, size=(n_x, n_a))
            grad = m.pg_gradient(logits, q)
            fd = np.zeros_like(grad)
            for i in range(n_x):
                for j in range(n_a):
                    up = logits.copy()
                    up[i, j] += h
                    dn = logits.copy()
                    dn[i, j] -= h
                    fd[i, j] = (m.pg_objective(up, q)
                                - m.pg_objective(dn, q)) / (2 * h)
            assert np.abs(grad - fd).max() < 1e-6

    def test_check_ascent_mode(self):
        rng = np.random.default_rng(13)
        cfg = m.RlConfig(check_ascent=True, pg_steps=50)
        for _ in range(10):
            logits = rng.normal(size=(2, 3))
            q = rng.normal(size=(2, 3))
            m.policy_gradient(q, logits, cfg)  # raises if J ever decreases

    def test_row_scale_damps_single_row(self):
        q = np.array([[0.0, 1.0], [0.0, 1.0]])
        cfg = m.RlConfig(pg_steps=10, pg_lr=0.5)
        full = m.policy_gradient(q, np.zeros((2, 2)), cfg)
        damped = m.policy_gradient(q, np.zeros((2, 2)), cfg,
                                   row_scale=np.array([1.0, 0.25]))
        np.testing.assert_array_equal(full[0], damped[0])
        assert abs(damped[1, 1]) < abs(full[1, 1])


class TestSolveStageRl:
    def test_terminal_stage_matches_do_nothing(self, malware, grid_m50):
        cfg = m.RlConfig(seed=5)
        v0 = np.zeros((grid_m50.n_points, 2))
        for g in (0, 25, 50):
            res = m.solve_stage_rl(grid_m50.points[g], v0, grid_m50,
                                   malware, cfg, rngmod.stream(5, 0, 59, g))
            target = np.array([[1.0, 0.0], [1.0, 0.0]])
            assert np.abs(res.gamma - target).max() <= 0.02

    def test_degenerate_config_returns_uniform(self, malware, grid_m50):
        cfg = m.RlConfig(policy_iters=1, pg_steps=0)
        v0 = np.zeros((grid_m50.n_points, 2))
        res = m.solve_stage_rl(grid_m50.points[10], v0, grid_m50, malware,
                               cfg, rngmod.stream(0, 0, 0, 10))
        np.testing.assert_array_equal(res.gamma, np.full((2, 2), 0.5))

    def test_mid_horizon_matches_exact(self, malware, grid_m50, exact_m50):
        # oracle comparison at every grid point of a mid-horizon stage
        cfg = m.RlConfig(seed=1)
        t = 30
        v_next = exact_m50["tables"][t + 1].v
        exact_gamma = exact_m50["atlas"].probs[t]
        worst = 0.0
        for g in range(grid_m50.n_points):
            res = m.solve_stage_rl(grid_m50.points[g], v_next, grid_m50,
                                   malware, cfg,
                                   rngmod.stream(1, 0, t, g))
            tv = 0.5 * np.abs(res.gamma - exact_gamma[g]).sum(axis=1).max()
            worst = max(worst, tv)
        assert worst <= 0.05

    def test_same_stream_is_bit_identical(self, malware, grid_m50):
        cfg = m.RlConfig(seed=9)
        v0 = np.zeros((grid_m50.n_points, 2))
        r1 = m.solve_stage_rl(grid_m50.points[7], v0, grid_m50, malware,
                              cfg, rngmod.stream(9, 0, 59, 7))
        r2 = m.solve_stage_rl(grid_m50.points[7], v0, grid_m50, malware,
                              cfg, rngmod.stream(9, 0, 59, 7))
        np.testing.assert_array_equal(r1.gamma, r2.gamma)
        np.testing.assert_array_equal(r1.q, r2.q)


class TestRlBackwardSolve:
    def test_zero_reward_gives_exactly_zero_values(self):
        kernel = np.zeros((2, 2, 2))
        kernel[:, :, 0] = 1.0
        env = EnvModel(name="null", n_types=2, n_actions=2, discount=0.9,
                       horizon=3, reward_fn=lambda z: np.zeros((2, 2)),
                       kernel_fn=lambda z: kernel)
        grid = m.build_grid(2, 5)
        cfg = m.RlConfig(batch_size=50, policy_iters=3)
        atlas, tables, diag = m.rl_backward_solve(env, grid, cfg)
        for tab in tables:
            np.testing.assert_array_equal(tab.v, 0.0)
        for t in range(3):
            np.testing.assert_array_equal(atlas.probs[t],
                                          np.full((grid.n_points, 2, 2), 0.5))

    def test_same_seed_bit_identical_atlas(self):
        env = m.malware_env(m.MalwareParams(horizon=4))
        grid = m.build_grid(2, 8)
        cfg = m.RlConfig(batch_size=200, policy_iters=8, seed=21)
        a1, t1, _ = m.rl_backward_solve(env, grid, cfg)
        a2, t2, _ = m.rl_backward_solve(env, grid, cfg)
        np.testing.assert_array_equal(a1.probs, a2.probs)
        for x, y in zip(t1, t2):
            np.testing.assert_array_equal(x.q, y.q)

    def test_thread_count_does_not_change_result(self):
        env = m.malware_env(m.MalwareParams(horizon=3))
        grid = m.build_grid(2, 6)
        cfg = m.RlConfig(batch_size=100, policy_iters=4, seed=2)
        a1, _, _ = m.rl_backward_solve(env, grid, cfg, threads=1)
        a4, _, _ = m.rl_backward_solve(env, grid, cfg, threads=4)
        np.testing.assert_array_equal(a1.probs, a4.probs)

    def test_sampler_only_environment_runs(self, malware):
        # black-box flavor of the malware game: kernel hidden, flow estimated
        ref = m.malware_env(m.MalwareParams(horizon=3))

        def sampler(x, a, z, n, rng):
            return ref.sample_many(x, a, z, n, rng)

        env = EnvModel(name="blackbox", n_types=2, n_actions=2, discount=0.9,
                       horizon=3, reward_fn=ref.reward_fn,
                       sampler_fn=sampler)
        grid = m.build_grid(2, 6)
        cfg = m.RlConfig(batch_size=400, policy_iters=10,
                         flow_samples=4000, seed=3)
        atlas_bb, _, _ = m.rl_backward_solve(env, grid, cfg)
        atlas_k, _, _ = m.rl_backward_solve(ref, grid, cfg)
        assert 0.5 * np.abs(atlas_bb.probs - atlas_k.probs).sum(-1).max() <= 0.1

    def test_benchmark_residual_bound(self, rl_m50):
        # gamma best-responds to its own estimated Q within 0.05 everywhere
        assert rl_m50["diag"].worst_residual <= 0.05


def test_estimate_mean_field_step_close_to_kernel(malware):
    z = mean_field([0.4, 0.6])
    gamma = prescription([[0.8, 0.2], [0.3, 0.7]])
    exact = m.propagate_mean_field(z, gamma, malware.kernel_tensor(z))
    est = estimate_mean_field_step(malware, z, gamma, 100_000,
                                   rngmod.stream(0, 6))
    assert np.abs(est - exact).max() <= 0.01
