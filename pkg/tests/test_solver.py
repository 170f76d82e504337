import numpy as np
import pytest

from robust_mc.matcore import RngStream
from robust_mc.model import (
    FactorPair,
    HuberParams,
    ObservationSet,
    huber_rho,
    objective,
)
from robust_mc.solver import (
    DivergenceError,
    GdConfig,
    gd_run,
    loo_loss_objective,
)
from robust_mc.spectral import spectral_initialize
from robust_mc.synth import GaussianNoise, NoNoise, make_ground_truth, sample_observations


def small_instance(seed, n=30, r=3, p=0.5, sigma=0.01):
    gen = RngStream(seed, 0).generator()
    truth = make_ground_truth(n, r, gen)
    noise = GaussianNoise(sigma=sigma) if sigma > 0 else NoNoise()
    obs = sample_observations(truth, p, noise, gen)
    return truth, obs


def loo_objective_oracle(f, obs, truth, l, tau):
    """Direct scalar-loop evaluation of the leave-one-out loss."""
    n = obs.n1
    total = 0.0
    for i, j, v in zip(obs.rows, obs.cols, obs.values):
        if (l <= n and i == l - 1) or (l > n and j == l - n - 1):
            continue
        total += huber_rho(float(f.x[i] @ f.y[j]) - v, tau)
    total /= 2.0 * obs.rate_p
    if l <= n:
        for j in range(n):
            total += 0.5 * huber_rho(float(f.x[l - 1] @ f.y[j]) - truth[l - 1, j], tau)
    else:
        for i in range(n):
            total += 0.5 * huber_rho(float(f.x[i] @ f.y[l - n - 1]) - truth[i, l - n - 1], tau)
    g = f.x.T @ f.x - f.y.T @ f.y
    return total + np.sum(g * g) / 8.0


class TestGdRun:
    def test_stationary_at_exact_truth(self):
        # axis-aligned balanced factors: gradient is exactly zero, so the run
        # stops after one no-op step with the initial state untouched
        n, r = 8, 3
        s = np.array([3.0, 2.0, 1.0])
        x = np.zeros((n, r))
        y = np.zeros((n, r))
        root = np.sqrt(s)
        for k in range(r):
            x[k, k] = root[k]
            y[k + r, k] = root[k]
        f = FactorPair(x, y)
        m = f.product()
        rows, cols = np.nonzero(np.ones((n, n), dtype=bool))
        obs = ObservationSet(n, n, 1.0, rows, cols, m[rows, cols])
        cfg = GdConfig(eta=0.05, max_iters=100, rel_change_tol=1e-12, tau=100.0)
        trace = gd_run(f, obs, cfg, truth=m)
        assert trace.stop_reason == "tolerance"
        assert trace.iters_run == 1
        assert np.array_equal(trace.final.x, f.x)
        assert np.array_equal(trace.final.y, f.y)

    def test_near_stationary_at_random_truth(self):
        truth, obs = small_instance(70, p=1.0, sigma=0.0)
        cfg = GdConfig(eta=0.05, max_iters=100, rel_change_tol=1e-12, tau=100.0)
        trace = gd_run(truth.factors_star, obs, cfg, truth=truth.m_star)
        assert trace.stop_reason == "tolerance"
        assert trace.iters_run == 1
        assert np.allclose(trace.final.x, truth.factors_star.x, atol=1e-14)
        assert np.allclose(trace.final.y, truth.factors_star.y, atol=1e-14)

    def test_converges_on_desk_instance(self):
        truth, obs = small_instance(71, n=60, r=3, p=0.5, sigma=1e-4)
        tau = 3 * (truth.inf_norm + 1e-4 * np.sqrt(60 * 0.5))
        init = spectral_initialize(obs, tau, 3)
        cfg = GdConfig(eta=0.05, max_iters=2000, rel_change_tol=1e-10, tau=tau)
        trace = gd_run(init.factors, obs, cfg, truth=truth.m_star)
        errs = [rec.rel_error for rec in trace.records]
        assert errs[-1] < 0.02 * errs[0]

    def test_monotone_descent_small_step(self):
        # at a 10x-reduced step the objective must be nonincreasing
        truth, obs = small_instance(72, n=40, r=3, p=0.5, sigma=1e-3)
        tau = 3 * truth.inf_norm
        init = spectral_initialize(obs, tau, 3)
        cfg = GdConfig(eta=0.005, max_iters=200, rel_change_tol=0.0,
                       record_every=1, tau=tau)
        trace = gd_run(init.factors, obs, cfg, truth=truth.m_star)
        objs = np.array([rec.objective for rec in trace.records])
        assert np.all(np.diff(objs) <= 1e-12)

    def test_rotation_equivariance(self):
        truth, obs = small_instance(73, n=25, r=3, p=0.6, sigma=1e-3)
        tau = 3 * truth.inf_norm
        init = spectral_initialize(obs, tau, 3)
        gen = RngStream(73, 5).generator()
        q, _ = np.linalg.qr(gen.standard_normal((3, 3)))
        rotated = FactorPair(init.factors.x @ q, init.factors.y @ q)
        cfg = GdConfig(eta=0.05, max_iters=50, rel_change_tol=0.0, tau=tau)
        a = gd_run(init.factors, obs, cfg, truth=truth.m_star)
        b = gd_run(rotated, obs, cfg, truth=truth.m_star)
        assert np.allclose(b.final.x, a.final.x @ q, atol=1e-8)
        assert np.allclose(b.final.y, a.final.y @ q, atol=1e-8)

    def test_infinite_tau_matches_least_squares_gd_oracle(self):
        truth, obs = small_instance(74, n=20, r=2, p=0.7, sigma=0.01)
        init = spectral_initialize(obs, np.inf, 2)
        cfg = GdConfig(eta=0.05, max_iters=50, rel_change_tol=0.0, tau=np.inf)
        trace = gd_run(init.factors, obs, cfg, truth=truth.m_star)
        # dedicated least-squares GD: explicit residual gradient, no clipping
        x, y = init.factors.x.copy(), init.factors.y.copy()
        for _ in range(50):
            resid = np.zeros((obs.n1, obs.n2))
            fit = np.einsum("kr,kr->k", x[obs.rows], y[obs.cols])
            resid[obs.rows, obs.cols] = (fit - obs.values) / (2.0 * obs.rate_p)
            g = x.T @ x - y.T @ y
            gx = resid @ y + 0.5 * x @ g
            gy = resid.T @ x - 0.5 * y @ g
            x, y = x - 0.05 * gx, y - 0.05 * gy
        assert np.allclose(trace.final.x, x, atol=1e-12)
        assert np.allclose(trace.final.y, y, atol=1e-12)

    def test_imbalance_stays_small_from_spectral_init(self):
        truth, obs = small_instance(75, n=60, r=4, p=0.5, sigma=1e-4)
        tau = 3 * truth.inf_norm
        init = spectral_initialize(obs, tau, 4)
        cfg = GdConfig(eta=0.05, max_iters=300, rel_change_tol=0.0,
                       record_every=10, tau=tau)
        trace = gd_run(init.factors, obs, cfg, truth=truth.m_star)
        sigma_max = truth.sigma_max
        for rec in trace.records:
            assert rec.imbalance <= 1e-2 * sigma_max

    def test_divergence_raises(self):
        truth, obs = small_instance(76, n=20, r=2, p=0.8, sigma=0.0)
        init = spectral_initialize(obs, np.inf, 2)
        cfg = GdConfig(eta=50.0, max_iters=500, rel_change_tol=0.0, tau=np.inf)
        with pytest.raises(DivergenceError) as err:
            gd_run(init.factors, obs, cfg, truth=truth.m_star)
        assert err.value.iteration >= 1

    def test_max_iters_stop_reason(self):
        truth, obs = small_instance(77, n=20, r=2, p=0.7, sigma=0.01)
        init = spectral_initialize(obs, 1.0, 2)
        cfg = GdConfig(eta=0.05, max_iters=10, rel_change_tol=0.0, tau=1.0)
        trace = gd_run(init.factors, obs, cfg, truth=truth.m_star)
        assert trace.stop_reason == "max_iters"
        assert trace.iters_run == 10

    def test_records_strictly_increasing(self):
        truth, obs = small_instance(78, n=20, r=2, p=0.7, sigma=0.01)
        init = spectral_initialize(obs, 1.0, 2)
        cfg = GdConfig(eta=0.05, max_iters=37, rel_change_tol=0.0,
                       record_every=10, tau=1.0)
        trace = gd_run(init.factors, obs, cfg, truth=truth.m_star)
        iters = [rec.iteration for rec in trace.records]
        assert iters == [0, 10, 20, 30, 37]
        assert all(rec.rel_error >= 0 for rec in trace.records)

    def test_loo_mode_requires_truth(self):
        truth, obs = small_instance(79, n=20, r=2)
        init = spectral_initialize(obs, 1.0, 2)
        cfg = GdConfig(eta=0.05, max_iters=5, tau=1.0, loo_index=1)
        with pytest.raises(ValueError):
            gd_run(init.factors, obs, cfg)


class TestLooLoss:
    def test_zero_at_truth_noiseless(self):
        truth, obs = small_instance(80, p=0.6, sigma=0.0)
        val = loo_loss_objective(truth.factors_star, obs, truth.m_star, 3, 100.0)
        assert val == pytest.approx(0.0, abs=1e-18)

    def test_full_observation_noiseless_equals_standard(self):
        # with p=1 the 1/2p and 1/2 weights coincide and the clean line
        # matches the observed line, so the losses agree exactly
        truth, obs = small_instance(81, p=1.0, sigma=0.0)
        gen = RngStream(81, 1).generator()
        f = FactorPair(gen.standard_normal(truth.factors_star.x.shape),
                       gen.standard_normal(truth.factors_star.y.shape))
        std = objective(f, obs, HuberParams(0.9))
        for l in (1, 15, 30, 31, 45, 60):
            loo = loo_loss_objective(f, obs, truth.m_star, l, 0.9)
            assert loo == pytest.approx(std, rel=1e-12)

    def test_matches_scalar_oracle(self):
        truth, obs = small_instance(82, n=15, r=2, p=0.5, sigma=0.3)
        gen = RngStream(82, 1).generator()
        f = FactorPair(gen.standard_normal((15, 2)), gen.standard_normal((15, 2)))
        for l in (1, 8, 15, 16, 23, 30):
            for tau in (0.4, np.inf):
                got = loo_loss_objective(f, obs, truth.m_star, l, tau)
                want = loo_objective_oracle(f, obs, truth.m_star, l, tau)
                assert got == pytest.approx(want, rel=1e-12)

    def test_index_out_of_range(self):
        truth, obs = small_instance(83, n=15, r=2)
        f = truth.factors_star
        with pytest.raises(ValueError):
            loo_loss_objective(f, obs, truth.m_star, 0, 1.0)
        with pytest.raises(ValueError):
            loo_loss_objective(f, obs, truth.m_star, 31, 1.0)


class TestLooGradient:
    def test_matches_finite_differences(self):
        truth, obs = small_instance(84, n=12, r=2, p=0.6, sigma=0.2)
        gen = RngStream(84, 1).generator()
        f = FactorPair(0.5 * gen.standard_normal((12, 2)),
                       0.5 * gen.standard_normal((12, 2)))
        from robust_mc.solver import _LooTerms

        for l in (1, 7, 12, 13, 20, 24):
            for tau in (0.3, np.inf):
                terms = _LooTerms(obs, truth.m_star, l)
                gx, gy = terms.gradient(f, tau)
                h = 1e-6
                fd_x = np.zeros_like(f.x)
                fd_y = np.zeros_like(f.y)
                for arr, out in ((f.x, fd_x), (f.y, fd_y)):
                    for idx in np.ndindex(arr.shape):
                        orig = arr[idx]
                        arr[idx] = orig + h
                        hi = terms.objective(f, tau)
                        arr[idx] = orig - h
                        lo = terms.objective(f, tau)
                        arr[idx] = orig
                        out[idx] = (hi - lo) / (2 * h)
                num = np.linalg.norm(np.vstack([gx - fd_x, gy - fd_y]))
                den = np.linalg.norm(np.vstack([fd_x, fd_y]))
                assert num <= 1e-5 * den

    def test_run_invariant_to_left_out_row_noise(self):
        # bitwise-identical traces when only row-l noise is resampled
        gen = RngStream(85, 0).generator()
        truth = make_ground_truth(20, 2, gen)
        obs = sample_observations(truth, 0.6, GaussianNoise(sigma=0.1), gen)
        l = 1
        resample = RngStream(85, 42).generator()
        in_row = obs.rows == (l - 1)
        vals2 = obs.values.copy()
        vals2[in_row] = (truth.m_star[obs.rows[in_row], obs.cols[in_row]]
                         + resample.normal(0, 0.1, int(in_row.sum())))
        obs2 = ObservationSet(obs.n1, obs.n2, obs.rate_p, obs.rows, obs.cols, vals2)

        from robust_mc.spectral import loo_initialize

        tau = 3 * truth.inf_norm
        cfg = GdConfig(eta=0.05, max_iters=80, rel_change_tol=0.0,
                       record_every=1, tau=tau, loo_index=l)
        a = gd_run(loo_initialize(obs, truth.m_star, l, tau, 2).factors,
                   obs, cfg, truth=truth.m_star)
        b = gd_run(loo_initialize(obs2, truth.m_star, l, tau, 2).factors,
                   obs2, cfg, truth=truth.m_star)
        assert np.array_equal(a.final.x, b.final.x)
        assert np.array_equal(a.final.y, b.final.y)
        assert [r.objective for r in a.records] == [r.objective for r in b.records]
