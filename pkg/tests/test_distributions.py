import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import gamma as sp_gamma
from scipy.stats import matrix_normal, multivariate_t, norm, wishart

from conftest import random_mnw, random_spd
from efeagent.distributions import (
    DistributionError,
    Gaussian,
    LocationScaleT,
    MatrixNormalWishart,
    MomentUndefinedError,
    gaussian_cross_entropy_from_t,
    mnw_log_pdf,
    t_entropy,
    t_log_pdf,
    t_log_pdf_grad,
    t_log_pdf_hess,
)


class TestSPDValidation:
    def test_rejects_indefinite_covariance(self):
        with pytest.raises(DistributionError):
            Gaussian(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_tiny_eigenvalue(self):
        with pytest.raises(DistributionError):
            Gaussian(np.zeros(2), np.diag([1.0, 1e-12]))

    def test_symmetrizes_input(self):
        g = Gaussian(np.zeros(2), np.array([[2.0, 0.5 + 1e-12], [0.5, 1.0]]))
        assert np.allclose(g.cov, g.cov.T)

    def test_dimension_mismatch(self):
        with pytest.raises(DistributionError):
            Gaussian(np.zeros(3), np.eye(2))

    def test_mnw_dof_bound(self):
        with pytest.raises(DistributionError):
            MatrixNormalWishart(np.zeros((3, 2)), np.eye(3), np.eye(2), dof=1.0)

    def test_t_dof_positive(self):
        with pytest.raises(DistributionError):
            LocationScaleT(0.0, np.zeros(1), np.eye(1))


class TestTLogPdf:
    def test_gaussian_limit(self):
        # eta -> infinity approaches the standard normal log-density at 10 points
        d = LocationScaleT(1e6, np.zeros(2), np.eye(2))
        rng = np.random.default_rng(0)
        for y in rng.normal(size=(10, 2)):
            gauss = -np.log(2 * np.pi) - 0.5 * y @ y
            assert t_log_pdf(d, y) == pytest.approx(gauss, abs=1e-3)

    def test_peak_gaussian_limit_value(self):
        d = LocationScaleT(1e6, np.zeros(2), np.eye(2))
        assert t_log_pdf(d, np.zeros(2)) == pytest.approx(-np.log(2 * np.pi), abs=1e-3)

    @given(
        delta=st.lists(st.floats(-50, 50), min_size=2, max_size=2),
        eta=st.floats(0.5, 200.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_symmetric_about_location(self, delta, eta):
        d = LocationScaleT(eta, np.array([0.7, -1.2]), np.array([[2.0, 0.3], [0.3, 1.0]]))
        delta = np.asarray(delta)
        left = t_log_pdf(d, d.loc + delta)
        right = t_log_pdf(d, d.loc - delta)
        assert left == pytest.approx(right, rel=1e-12, abs=1e-12)

    def test_matches_grid_normalization_1d(self):
        # Frozen from a brute-force normalization of the unnormalized density
        # (1 + y^2/eta)^(-(eta+1)/2) on a [-400, 400] grid of 4e6 points.
        d = LocationScaleT(3.0, np.zeros(1), np.eye(1))
        assert t_log_pdf(d, np.array([1.0])) == pytest.approx(-1.5762529600697899, abs=1e-6)

    def test_matches_scipy_multivariate_t(self, rng):
        scale = random_spd(rng, 3)
        loc = rng.normal(size=3)
        d = LocationScaleT(7.5, loc, scale)
        ref = multivariate_t(loc=loc, shape=scale, df=7.5)
        for y in rng.normal(size=(5, 3), scale=3.0):
            assert t_log_pdf(d, y) == pytest.approx(ref.logpdf(y), rel=1e-12)

    def test_integrates_to_one_1d(self):
        d = LocationScaleT(4.0, np.array([0.5]), np.array([[2.0]]))
        total, _ = quad(lambda y: np.exp(t_log_pdf(d, np.array([y]))), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_integrates_to_one_2d(self):
        from scipy.integrate import dblquad

        d = LocationScaleT(5.0, np.zeros(2), np.array([[1.0, 0.4], [0.4, 1.5]]))
        total, err = dblquad(
            lambda y2, y1: np.exp(t_log_pdf(d, np.array([y1, y2]))),
            -60,
            60,
            -60,
            60,
        )
        assert total == pytest.approx(1.0, abs=5e-3)

    def test_grad_and_hess_match_finite_differences(self, rng):
        d = LocationScaleT(6.0, np.array([0.2, -0.4]), random_spd(rng, 2))
        y = np.array([0.9, 0.3])
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (t_log_pdf(d, y + e) - t_log_pdf(d, y - e)) / (2 * h)
            assert t_log_pdf_grad(d, y)[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)
        hess = t_log_pdf_hess(d, y)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd_row = (t_log_pdf_grad(d, y + e) - t_log_pdf_grad(d, y - e)) / (2 * h)
            assert np.allclose(hess[i], fd_row, rtol=1e-5, atol=1e-7)


class TestTEntropy:
    def test_quadrature_oracle_1d(self):
        d = LocationScaleT(5.0, np.zeros(1), np.eye(1))
        integrand = lambda y: -np.exp(t_log_pdf(d, np.array([y]))) * t_log_pdf(d, np.array([y]))
        ref, _ = quad(integrand, -np.inf, np.inf, limit=200)
        assert t_entropy(d) == pytest.approx(ref, abs=1e-6)

    def test_quadrature_oracle_1d_wide_scale(self):
        d = LocationScaleT(9.0, np.array([2.0]), np.array([[7.0]]))
        integrand = lambda y: -np.exp(t_log_pdf(d, np.array([y]))) * t_log_pdf(d, np.array([y]))
        ref, _ = quad(integrand, -np.inf, np.inf, limit=200)
        assert t_entropy(d) == pytest.approx(ref, abs=1e-6)

    def test_positive_for_unit_scale(self):
        assert t_entropy(LocationScaleT(100.0, np.zeros(2), np.eye(2))) > 0

    @given(c=st.floats(0.01, 100.0), eta=st.floats(2.5, 300.0))
    @settings(max_examples=50, deadline=None)
    def test_scale_shift_structure(self, c, eta):
        sigma = np.array([[1.3, 0.2], [0.2, 0.9]])
        base = t_entropy(LocationScaleT(eta, np.zeros(2), sigma))
        scaled = t_entropy(LocationScaleT(eta, np.zeros(2), c * sigma))
        assert scaled - base == pytest.approx(np.log(c), rel=1e-9, abs=1e-9)

    @given(mu=st.floats(-30, 30))
    @settings(max_examples=25, deadline=None)
    def test_translation_invariant(self, mu):
        sigma = np.array([[0.5]])
        a = t_entropy(LocationScaleT(5.0, np.array([0.0]), sigma))
        b = t_entropy(LocationScaleT(5.0, np.array([mu]), sigma))
        assert a == pytest.approx(b, rel=1e-12)


class TestGaussianCrossEntropyFromT:
    def test_requires_second_moment(self):
        d = LocationScaleT(2.0, np.zeros(1), np.eye(1))
        with pytest.raises(MomentUndefinedError):
            gaussian_cross_entropy_from_t(d, Gaussian(np.zeros(1), np.eye(1)))

    def test_degenerate_predictive_at_goal(self):
        # With the T collapsing onto the goal mean, only the Gaussian's own
        # normalization remains.
        g = Gaussian(np.array([1.0]), np.array([[0.5]]))
        d = LocationScaleT(1e7, np.array([1.0]), np.array([[1e-9]]))
        expected = 0.5 * np.log(2 * np.pi * 0.5)
        assert gaussian_cross_entropy_from_t(d, g) == pytest.approx(expected, abs=1e-6)

    def test_monotone_in_location_gap(self):
        g = Gaussian(np.zeros(2), np.eye(2))
        gaps = np.linspace(0.0, 4.0, 9)
        values = [
            gaussian_cross_entropy_from_t(
                LocationScaleT(5.0, np.array([gap, 0.0]), 0.3 * np.eye(2)), g
            )
            for gap in gaps
        ]
        assert np.all(np.diff(values) > 0)

    def test_monte_carlo_oracle_1d(self):
        # E_T[-ln N(y | 1, 0.5)] by direct sampling of the T.
        eta, mu, sigma = 5.0, 0.3, 0.2
        m_star, s_star = 1.0, 0.5
        n = 1_000_000
        rng = np.random.default_rng(42)
        z = rng.standard_normal(n)
        g = rng.chisquare(eta, n)
        ys = mu + np.sqrt(sigma) * z / np.sqrt(g / eta)
        vals = -norm.logpdf(ys, loc=m_star, scale=np.sqrt(s_star))
        mc, se = vals.mean(), vals.std(ddof=1) / np.sqrt(n)
        closed = gaussian_cross_entropy_from_t(
            LocationScaleT(eta, np.array([mu]), np.array([[sigma]])),
            Gaussian(np.array([m_star]), np.array([[s_star]])),
        )
        assert abs(closed - mc) < 3 * se

    def test_monte_carlo_oracle_2d(self):
        eta = 7.0
        loc = np.array([0.4, -0.2])
        scale = np.array([[0.5, 0.1], [0.1, 0.3]])
        mean = np.array([1.0, 0.5])
        cov = np.array([[0.7, -0.2], [-0.2, 0.9]])
        n = 400_000
        rng = np.random.default_rng(7)
        z = rng.multivariate_normal(np.zeros(2), scale, size=n)
        g = rng.chisquare(eta, n)
        ys = loc + z / np.sqrt(g / eta)[:, None]
        from scipy.stats import multivariate_normal

        vals = -multivariate_normal(mean=mean, cov=cov).logpdf(ys)
        mc, se = vals.mean(), vals.std(ddof=1) / np.sqrt(n)
        closed = gaussian_cross_entropy_from_t(
            LocationScaleT(eta, loc, scale), Gaussian(mean, cov)
        )
        assert abs(closed - mc) < 3 * se


class TestMnwLogPdf:
    def test_factorizes_into_mn_times_wishart(self, rng):
        # scipy's matrix_normal and wishart serve as the reference for the
        # product decomposition.
        d = random_mnw(rng, 3, 2, nu=9.0)
        for _ in range(5):
            a = rng.normal(size=(3, 2))
            w = random_spd(rng, 2, scale=0.5)
            ref = matrix_normal(
                mean=d.mean,
                rowcov=np.linalg.inv(d.row_precision),
                colcov=np.linalg.inv(w),
            ).logpdf(a) + wishart(df=d.dof, scale=np.linalg.inv(d.scatter)).logpdf(w)
            assert mnw_log_pdf(d, a, w) == pytest.approx(ref, rel=1e-10)

    def test_scalar_normal_gamma_oracle(self):
        # D_x = D_y = 1 reduces to normal-gamma: N(a | m, 1/(lam w)) with
        # w ~ Gamma(nu/2, rate = omega/2).
        m, lam, omega, nu = 0.4, 2.0, 1.5, 6.0
        d = MatrixNormalWishart(
            np.array([[m]]), np.array([[lam]]), np.array([[omega]]), nu
        )
        for a, w in [(0.1, 0.5), (-1.2, 2.0), (0.9, 4.2)]:
            ref = norm.logpdf(a, loc=m, scale=1.0 / np.sqrt(lam * w)) + sp_gamma.logpdf(
                w, a=nu / 2, scale=2.0 / omega
            )
            assert mnw_log_pdf(
                d, np.array([[a]]), np.array([[w]])
            ) == pytest.approx(ref, rel=1e-10)

    def test_rotation_invariance(self, rng):
        d = random_mnw(rng, 4, 2, nu=8.0)
        a = rng.normal(size=(4, 2))
        w = random_spd(rng, 2)
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        rotated = MatrixNormalWishart(q @ d.mean, q @ d.row_precision @ q.T, d.scatter, d.dof)
        assert mnw_log_pdf(rotated, q @ a, w) == pytest.approx(
            mnw_log_pdf(d, a, w), rel=1e-10
        )

    def test_shape_mismatch(self, rng):
        d = random_mnw(rng, 3, 2)
        with pytest.raises(DistributionError):
            mnw_log_pdf(d, np.zeros((2, 2)), np.eye(2))
        with pytest.raises(DistributionError):
            mnw_log_pdf(d, np.zeros((3, 2)), np.eye(3))


class TestGaussianLimitOfT:
    def test_pointwise_convergence(self, rng):
        scale = random_spd(rng, 2)
        loc = rng.normal(size=2)
        d = LocationScaleT(1e6, loc, scale)
        from scipy.stats import multivariate_normal

        ref = multivariate_normal(mean=loc, cov=scale)
        for y in rng.normal(size=(10, 2), scale=2.0):
            assert t_log_pdf(d, y) == pytest.approx(ref.logpdf(y), abs=1e-3)
