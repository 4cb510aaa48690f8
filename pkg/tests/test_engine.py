"""Simulation engine: grids, noise substreams, Euler schemes, exact draws."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from ckls import (
    CklsParams,
    DomainError,
    NoiseMatrix,
    RegimeError,
    SingularSample,
    TimeGrid,
    derive_cir,
    euler_auxiliary,
    euler_ckls,
    euler_under_q,
    exact_sqrt_level,
    explicit_rate,
    explicit_rate_on_grid,
    make_transform,
    mean_rate,
    sample_cir_exact,
    transform_inverse,
)

HIGH = CklsParams(a=1.0, b=0.2, sigma=0.5, gamma=1.5, r0=1.0)
LOW = CklsParams(a=1.0, b=0.2, sigma=0.5, gamma=0.75, r0=1.0)


class TestTimeGrid:
    def test_uniform_from_zero_to_end(self):
        g = TimeGrid(2.0, 8)
        assert g.times[0] == 0.0 and g.times[-1] == 2.0
        np.testing.assert_allclose(np.diff(g.times), g.dt)

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 4)
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0)


class TestNoiseMatrix:
    def test_bit_identical_reruns(self):
        g = TimeGrid(1.0, 16)
        a = NoiseMatrix(42, 20, g).increments()
        b = NoiseMatrix(42, 20, g).increments()
        assert np.array_equal(a, b)

    def test_path_count_extension_is_stable(self):
        """Rows are substreams keyed by (seed, path index): growing the
        path count must not reshuffle earlier paths."""
        g = TimeGrid(1.0, 16)
        small = NoiseMatrix(7, 10, g).increments()
        big = NoiseMatrix(7, 50, g).increments()
        assert np.array_equal(small, big[:10])

    def test_variance_is_dt(self):
        g = TimeGrid(1.0, 64)
        dW = NoiseMatrix(3, 2000, g).increments()
        # SE of a variance estimate is ~ sqrt(2/n) relative, n = 128000
        assert dW.var() == pytest.approx(g.dt, rel=2e-2)

    def test_row_slicing(self):
        g = TimeGrid(1.0, 8)
        nm = NoiseMatrix(9, 12, g)
        assert np.array_equal(nm.row(5), nm.increments()[5])
        assert np.array_equal(nm.increments(3, 7), nm.increments()[3:7])

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            NoiseMatrix(-1, 4, TimeGrid(1.0, 4))


class TestEulerCkls:
    def test_single_deterministic_step(self):
        """Zero noise, b = 0: one step gives exactly r0 + a dt."""
        p = CklsParams(a=1.0, b=0.0, sigma=0.5, gamma=1.5, r0=1.0)
        grid = TimeGrid(0.25, 1)
        paths = euler_ckls(p, grid, np.zeros((1, 1)))
        assert paths[0].values[1] == 1.0 + 1.0 * 0.25

    def test_zero_noise_tends_to_ode_solution(self):
        """Oracle: the mean ODE r' = a - b r has the explicit solution
        a/b + (r0 - a/b) e^(-b t); zero-noise Euler must converge to it."""
        t = 1.0
        exact = HIGH.a / HIGH.b + (HIGH.r0 - HIGH.a / HIGH.b) * math.exp(-HIGH.b * t)
        errors = []
        for n in (64, 256, 1024):
            grid = TimeGrid(t, n)
            paths = euler_ckls(HIGH, grid, np.zeros((1, n)))
            errors.append(abs(paths[0].values[-1] - exact))
        assert errors[0] > errors[1] > errors[2]
        assert errors[-1] < 1e-3 * abs(exact)

    def test_terminal_mean_matches_closed_form(self):
        grid = TimeGrid(0.5, 256)
        noise = NoiseMatrix(21, 20_000, grid)
        paths = euler_ckls(HIGH, grid, noise)
        terminal = np.array([path.values[-1] for path in paths])
        se = terminal.std(ddof=1) / math.sqrt(terminal.size)
        assert abs(terminal.mean() - mean_rate(HIGH, 0.5)) <= 3.0 * se

    def test_truncation_counted_and_floored(self):
        # sigma large enough that additive-noise steps drive the state
        # negative; the scheme must clamp and count
        p = CklsParams(a=0.01, b=0.0, sigma=3.0, gamma=0.5, r0=0.05)
        grid = TimeGrid(1.0, 64)
        paths = euler_ckls(p, grid, NoiseMatrix(5, 200, grid))
        total = sum(path.truncations for path in paths)
        assert total > 0
        assert all(path.values.min() >= 1e-12 for path in paths)
        assert any(path.truncated for path in paths)


class TestEulerAuxiliary:
    def test_high_gamma_drift_step(self):
        """a=1, b=1, sigma=1, gamma=1.5 at x=1: drift 2-1-0.75 = 0.25."""
        p = CklsParams(a=1.0, b=1.0, sigma=1.0, gamma=1.5, r0=1.0)
        grid = TimeGrid(0.5, 1)
        res = euler_auxiliary(p, grid, np.zeros((1, 1)))
        assert res.paths[0].values[1] == pytest.approx(1.0 + 0.25 * 0.5, rel=1e-15)

    def test_low_gamma_variant_drifts(self):
        grid = TimeGrid(0.5, 1)
        derived = euler_auxiliary(LOW, grid, np.zeros((1, 1)), variant="derived")
        paper = euler_auxiliary(LOW, grid, np.zeros((1, 1)), variant="paper")
        # derived: 0.75*0.25/2 - 0.2 = -0.10625 ; paper: 0.75*0.5/2 - 0.2 = -0.0125
        assert derived.paths[0].values[1] == pytest.approx(1.0 - 0.10625 * 0.5, rel=1e-14)
        assert paper.paths[0].values[1] == pytest.approx(1.0 - 0.0125 * 0.5, rel=1e-14)

    def test_variant_ignored_for_high_gamma(self):
        grid = TimeGrid(0.5, 8)
        noise = NoiseMatrix(2, 16, grid).increments()
        a = euler_auxiliary(HIGH, grid, noise, variant="paper")
        b = euler_auxiliary(HIGH, grid, noise, variant="derived")
        np.testing.assert_array_equal(a.paths[0].values, b.paths[0].values)

    @pytest.mark.parametrize("p", [HIGH, LOW], ids=["high", "low"])
    def test_positivity_diagnostic(self, p):
        """Floor-hit fraction below 1% at dt = 2^-10, t = 1, 1e4 paths,
        and non-increasing as dt shrinks."""
        fracs = []
        for n_steps in (512, 1024):
            grid = TimeGrid(1.0, n_steps)
            res = euler_auxiliary(p, grid, NoiseMatrix(13, 10_000, grid))
            fracs.append(res.floor_fraction)
        assert fracs[-1] < 0.01
        assert fracs[1] <= fracs[0]
        assert res.min_values.shape == (10_000,)


class TestExactSqrtLevel:
    def test_time_zero_is_initial_level(self):
        cir = derive_cir(HIGH, make_transform(HIGH, 1.0))
        for z in (-3.0, 0.0, 2.5):
            assert exact_sqrt_level(cir, HIGH, 0.0, z) == math.sqrt(cir.y0)

    def test_driftless_variance(self):
        """b = 0: Var = sigma^2 C^2 t / 4."""
        p = CklsParams(a=1.0, b=0.0, sigma=0.5, gamma=1.5, r0=1.0)
        cir = derive_cir(p, make_transform(p, 1.0))
        z = np.random.default_rng(17).standard_normal(1_000_000)
        u = exact_sqrt_level(cir, p, 2.0, z)
        assert u.var(ddof=1) == pytest.approx(0.5**2 * 1.0 * 2.0 / 4.0, rel=5e-3)

    def test_ou_variance_frozen_value(self):
        """Oracle: quadrature of the variance integral
        (sigma C / 2)^2 int_0^1 e^(2 b (1-gamma)(1-s)) ds = 0.05664664,
        cross-checked by the sample variance of 1e6 draws."""
        cir = derive_cir(HIGH, make_transform(HIGH, 1.0))
        quad_val, _ = integrate.quad(lambda s: math.exp(-0.2 * (1.0 - s)), 0.0, 1.0)
        oracle = 0.0625 * quad_val
        assert oracle == pytest.approx(0.05664664, abs=5e-9)
        z = np.random.default_rng(29).standard_normal(1_000_000)
        u = exact_sqrt_level(cir, HIGH, 1.0, z)
        assert u.var(ddof=1) == pytest.approx(oracle, rel=5e-3)
        analytic_std = exact_sqrt_level(cir, HIGH, 1.0, 1.0) - exact_sqrt_level(cir, HIGH, 1.0, 0.0)
        assert analytic_std**2 == pytest.approx(oracle, rel=1e-12)

    def test_errors(self):
        cir = derive_cir(HIGH, make_transform(HIGH, 1.0))
        with pytest.raises(DomainError):
            exact_sqrt_level(cir, HIGH, -0.5, 0.0)
        bad = CklsParams(a=1.0, b=-0.1, sigma=0.5, gamma=0.75, r0=1.0)
        with pytest.raises(RegimeError):
            exact_sqrt_level(cir, bad, 1.0, 0.0)


class TestExplicitRate:
    def test_time_zero(self):
        for z in (-2.0, 0.0, 3.0):
            assert explicit_rate(HIGH, 0.0, z) == HIGH.r0

    def test_driftless_collapse(self):
        """b = 0, gamma = 3/2: r_t = |r0^(-1/2) + (sigma/2) sqrt(t) z|^(-2)."""
        p = CklsParams(a=1.0, b=0.0, sigma=0.5, gamma=1.5, r0=1.0)
        z = np.array([-1.2, 0.3, 2.0])
        t = 0.8
        expected = np.abs(1.0 + 0.25 * math.sqrt(t) * z) ** (-2.0)
        np.testing.assert_allclose(explicit_rate(p, t, z), expected, rtol=1e-14)

    @pytest.mark.parametrize("p", [HIGH, LOW], ids=["high", "low"])
    def test_equals_inverse_transform_of_level_for_any_c(self, p):
        """Squaring the Gaussian sqrt level and mapping through the inverse
        transform reproduces the explicit rate for the same draw, for any
        C -- the closed form is C-free."""
        z = np.linspace(-3.5, 3.5, 41)
        t = 0.7
        direct = explicit_rate(p, t, z)
        for c in (1.0, 7.0):
            tr = make_transform(p, c)
            cir = derive_cir(p, tr)
            level = exact_sqrt_level(cir, p, t, z) ** 2
            np.testing.assert_allclose(
                transform_inverse(tr, level), direct, rtol=1e-10
            )

    def test_singular_sample_raised(self):
        # b = 0, sigma = 2, gamma = 3/2, t = 1: base = 1 + z, exactly zero
        # at z = -1 (the probability-zero singularity hit numerically)
        p = CklsParams(a=1.0, b=0.0, sigma=2.0, gamma=1.5, r0=1.0)
        with pytest.raises(SingularSample):
            explicit_rate(p, 1.0, np.array([0.3, -1.0, 0.7]))

    def test_invalid_regime_rejected(self):
        bad = CklsParams(a=1.0, b=-0.1, sigma=0.5, gamma=0.75, r0=1.0)
        with pytest.raises(RegimeError):
            explicit_rate(bad, 1.0, 0.0)


class TestSampleCirExact:
    def test_two_sample_ks_against_squared_sqrt_level(self):
        """Self-consistency oracle: exact level draws via the noncentral
        sampler against squared Gaussian draws, 1e5 each."""
        cir = derive_cir(HIGH, make_transform(HIGH, 1.0))
        n = 100_000
        z = np.random.default_rng(31).standard_normal(n)
        a = exact_sqrt_level(cir, HIGH, 0.5, z) ** 2
        b = sample_cir_exact(cir, HIGH, 0.5, np.random.default_rng(37), n)
        res = stats.ks_2samp(a, b)
        # two-sample 1% critical: c(0.01) sqrt(2/n)
        assert res.statistic < 1.6276 * math.sqrt(2.0 / n)

    def test_mean_identity(self):
        from ckls import transition_spec

        cir = derive_cir(HIGH, make_transform(HIGH, 1.0))
        spec = transition_spec(HIGH, cir, 0.5)
        draws = sample_cir_exact(cir, HIGH, 0.5, np.random.default_rng(41), 100_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - spec.mean()) <= 3.0 * se

    def test_vanishing_initial_level_is_central(self):
        """y0 -> 0 kills the noncentrality: draws match scale * chi2(1)."""
        from ckls import CirParams, transition_spec

        cir = CirParams(drift_const=0.0625, drift_lin=-0.2, vol=0.5, y0=1e-12)
        spec = transition_spec(HIGH, cir, 0.5)
        assert spec.nonc < 1e-9
        draws = sample_cir_exact(cir, HIGH, 0.5, np.random.default_rng(43), 50_000)
        ks = stats.kstest(draws / spec.scale, lambda x: stats.chi2.cdf(x, 1.0))
        assert ks.statistic < 1.6276 / math.sqrt(50_000)


class TestPathwiseConsistency:
    @pytest.mark.parametrize("p", [HIGH, LOW], ids=["high", "low"])
    def test_grid_solution_strong_error_shrinks(self, p):
        """Euler under the transformed dynamics against the pathwise
        closed-form reference: the shared-noise gap halves-ish with dt."""
        t = 1.0
        n_fine = 512
        grid_fine = TimeGrid(t, n_fine)
        dW = NoiseMatrix(47, 200, grid_fine).increments()
        ref = explicit_rate_on_grid(p, grid_fine, dW)
        gaps = []
        for stride in (8, 2):
            n = n_fine // stride
            dW_c = dW.reshape(200, n, stride).sum(axis=2)
            euler = euler_under_q(p, TimeGrid(t, n), dW_c)
            gaps.append(np.abs(euler - ref[:, ::stride]).max(axis=1).mean())
        assert gaps[1] < gaps[0]

    def test_grid_solution_matches_single_time_law(self):
        grid = TimeGrid(0.5, 256)
        dW = NoiseMatrix(53, 4000, grid).increments()
        terminal = explicit_rate_on_grid(HIGH, grid, dW)[:, -1]
        z = np.random.default_rng(59).standard_normal(4000)
        direct = explicit_rate(HIGH, 0.5, z)
        assert stats.ks_2samp(terminal, direct).pvalue > 0.01
