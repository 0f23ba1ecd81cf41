"""Stein machinery tests: ODE solution bounds, exclusion generator, QCLT."""

import itertools

import numpy as np
import pytest

from noisyvoter.stein import (
    SteinProblem,
    exclusion_apply,
    exclusion_stein_residual,
    hypergeom_gaussian_w1,
    hypergeom_zeta_pmf,
    stein_bound_margins,
    stein_solve,
    stein_test_family,
    zeta_support,
)
from noisyvoter.transport import w1_sorted


def default_grid(nu, points=2001):
    return np.linspace(-8 * nu, 8 * nu, points)


class TestSteinSolve:
    def test_constant_h_gives_zero(self):
        prob = SteinProblem(lambda x: 3.0 * np.ones_like(x),
                            lambda x: np.zeros_like(x), 0.5)
        sol = stein_solve(prob, default_grid(0.5))
        assert np.max(np.abs(sol.f)) <= 1e-12

    def test_linear_h_gives_minus_one(self):
        # -x f + nu^2 f' = x is solved by the constant f = -1
        for nu in (0.1, 1.0, 2.0):
            prob = SteinProblem(lambda x: x, lambda x: np.ones_like(x), nu)
            sol = stein_solve(prob, default_grid(nu))
            assert np.max(np.abs(sol.f + 1.0)) <= 1e-10
            assert abs(sol.e_h) <= 1e-12

    def test_linear_h_sup_norm(self):
        prob = SteinProblem(lambda x: x, lambda x: np.ones_like(x), 1.0)
        sol = stein_solve(prob, default_grid(1.0))
        sup = np.max(np.abs(sol.f))
        assert sup == pytest.approx(1.0, abs=1e-9)
        assert sup <= 2.0 * sol.h_deriv_sup

    @pytest.mark.parametrize("nu", [0.1, 0.25, 1.0])
    def test_family_bounds(self, nu):
        grid = np.linspace(-8 * nu, 8 * nu, 4001)
        for h, dh in stein_test_family():
            sol = stein_solve(SteinProblem(h, dh, nu), grid)
            margins = stein_bound_margins(sol, nu)
            assert min(margins.values()) >= -1e-9

    def test_ode_residual_on_grid(self):
        # the recovered derivative satisfies nu^2 f' - x f = h - E h exactly
        nu = 0.4
        prob = SteinProblem(np.tanh, lambda x: 1 / np.cosh(x) ** 2, nu)
        grid = default_grid(nu)
        sol = stein_solve(prob, grid)
        resid = nu ** 2 * sol.df - grid * sol.f - (np.tanh(grid) - sol.e_h)
        assert np.max(np.abs(resid)) <= 1e-12

    def test_finite_difference_consistency(self):
        # df from the ODE identity agrees with numerical differentiation of f
        nu = 1.0
        prob = SteinProblem(np.arctan, lambda x: 1 / (1 + x ** 2), nu)
        grid = default_grid(nu, 4001)
        sol = stein_solve(prob, grid)
        fd = np.gradient(sol.f, grid)
        inner = slice(100, -100)
        assert np.max(np.abs(fd[inner] - sol.df[inner])) <= 5e-4

    def test_gaussian_identity_quadrature(self):
        nu = 0.7
        grid = np.linspace(-9 * nu, 9 * nu, 4001)
        for h, dh in stein_test_family()[:8]:
            sol = stein_solve(SteinProblem(h, dh, nu), grid)
            w = np.exp(-0.5 * (grid / nu) ** 2)
            w /= np.trapezoid(w, grid)
            val = np.trapezoid((nu ** 2 * sol.df - grid * sol.f) * w, grid)
            assert abs(val) <= 1e-8

    def test_grid_span_validation(self):
        prob = SteinProblem(lambda x: x, lambda x: np.ones_like(x), 1.0)
        with pytest.raises(ValueError):
            stein_solve(prob, np.linspace(-4, 4, 101))


class TestExclusionGenerator:
    def test_linear_gives_minus_z(self):
        for n, ell in ((10, 3), (64, 32), (200, 150)):
            _, z = zeta_support(n, ell)
            out = exclusion_apply(n, ell, lambda x: x)
            assert np.max(np.abs(out + z)) <= 1e-12

    def test_constant_annihilated(self):
        out = exclusion_apply(30, 12, lambda x: np.full_like(x, 4.2))
        assert np.max(np.abs(out)) <= 1e-15

    @pytest.mark.parametrize("f", [lambda x: x, lambda x: x ** 2,
                                   lambda x: x ** 3, np.tanh])
    def test_stationarity(self, f):
        # hypergeometric expectation of the generator action vanishes
        for n, ell in ((20, 7), (64, 32), (256, 64)):
            pmf = hypergeom_zeta_pmf(n, ell)
            val = float(pmf.probs @ exclusion_apply(n, ell, f))
            assert abs(val) <= 1e-10


class TestZetaPmf:
    def test_small_case_variance(self):
        pmf = hypergeom_zeta_pmf(4, 2)
        assert pmf.var() == pytest.approx(1.0 / 12.0, abs=1e-12)
        assert abs(pmf.mean()) <= 1e-14

    @pytest.mark.parametrize("n,ell", [(16, 8), (100, 33), (4096, 2048), (4096, 137)])
    def test_variance_identity(self, n, ell):
        pmf = hypergeom_zeta_pmf(n, ell)
        m0 = ell / n
        target = n / (n - 1) * m0 ** 2 * (1 - m0) ** 2
        assert abs(pmf.var() - target) <= 1e-12
        assert abs(pmf.mean()) <= 1e-12

    @pytest.mark.parametrize("n,ell", [(6, 2), (9, 4), (12, 6), (12, 3)])
    def test_enumeration_oracle(self, n, ell):
        # uniform configurations with ell particles: count block-1 occupancy
        sites = range(n)
        block1 = set(range(n - ell, n))  # canonical: block 1 holds the last ell sites
        counts = {}
        total = 0
        for occ in itertools.combinations(sites, ell):
            y = len(set(occ) & block1)
            counts[y] = counts.get(y, 0) + 1
            total += 1
        ys, zs = zeta_support(n, ell)
        pmf = hypergeom_zeta_pmf(n, ell)
        for y, z, p in zip(ys, zs, pmf.probs):
            assert counts.get(int(y), 0) / total == pytest.approx(p, abs=1e-13)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            hypergeom_zeta_pmf(10, 0)
        with pytest.raises(ValueError):
            hypergeom_zeta_pmf(10, 10)


class TestExclusionSteinResidual:
    def test_linear_zero_residual(self):
        res = exclusion_stein_residual(64, 32, lambda x: x,
                                       lambda x: np.ones_like(x),
                                       lambda x: np.zeros_like(x),
                                       lambda x: np.zeros_like(x))
        assert res.max_residual <= 1e-12

    def test_quadratic_pointwise_bound(self):
        n, ell = 100, 40
        res = exclusion_stein_residual(n, ell, lambda x: x ** 2, lambda x: 2 * x,
                                       lambda x: 2 * np.ones_like(x),
                                       lambda x: np.zeros_like(x))
        _, z = zeta_support(n, ell)
        assert np.all(res.residual <= np.abs(z) / np.sqrt(n) + 1e-12)
        assert res.min_margin >= -1e-12

    @pytest.mark.parametrize("n,ell", [(64, 32), (256, 64), (1024, 512)])
    def test_smooth_family_bounds(self, n, ell):
        cases = [
            (lambda x: x ** 2, lambda x: 2 * x,
             lambda x: 2 * np.ones_like(x), lambda x: np.zeros_like(x)),
            (lambda x: x ** 3, lambda x: 3 * x ** 2,
             lambda x: 6 * x, lambda x: 6 * np.ones_like(x)),
            (np.tanh, lambda x: 1 / np.cosh(x) ** 2,
             lambda x: -2 * np.tanh(x) / np.cosh(x) ** 2,
             lambda x: (4 * np.tanh(x) ** 2 - 2 / np.cosh(x) ** 2) / np.cosh(x) ** 2),
        ]
        for fns in cases:
            res = exclusion_stein_residual(n, ell, *fns)
            assert res.min_margin >= -1e-12

    def test_residual_scaling_in_n(self):
        # quadrupling n at fixed density roughly halves the worst residual
        # (density kept away from 1/2, where the leading term degenerates)
        def worst(n):
            res = exclusion_stein_residual(
                n, n // 4, np.tanh, lambda x: 1 / np.cosh(x) ** 2,
                lambda x: -2 * np.tanh(x) / np.cosh(x) ** 2,
                lambda x: (4 * np.tanh(x) ** 2 - 2 / np.cosh(x) ** 2) / np.cosh(x) ** 2)
            return res.max_residual

        ratio = worst(4096) / worst(1024)
        assert 0.35 <= ratio <= 0.65


class TestGaussianDistance:
    def test_small_case_monte_carlo(self):
        n, ell = 4, 2
        exact, _ = hypergeom_gaussian_w1(n, ell)
        rng = np.random.default_rng(6)
        draws = 10_000_000
        zs = (rng.hypergeometric(ell, n - ell, ell, size=draws) - ell ** 2 / n) / np.sqrt(n)
        gs = rng.normal(0.0, 0.25, size=draws)
        batches = 10
        vals = [w1_sorted(z, g) for z, g in zip(np.array_split(zs, batches),
                                                np.array_split(gs, batches))]
        mc = np.mean(vals)
        se = np.std(vals, ddof=1) / np.sqrt(batches)
        floor = 1.7 * 0.25 * np.sqrt(2.0 / (draws / batches))
        assert abs(exact - mc) <= 3 * se + floor

    def test_distance_shrinks_along_sweep(self):
        ds = [hypergeom_gaussian_w1(n, n // 2)[0] for n in (64, 128, 256, 512)]
        assert all(d1 > d2 for d1, d2 in zip(ds, ds[1:]))

    def test_normalized_constant_stable(self):
        cs = [hypergeom_gaussian_w1(n, n // 2)[1] for n in (64, 256, 1024)]
        assert (max(cs) - min(cs)) / max(cs) <= 0.25
