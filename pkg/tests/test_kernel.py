import math

import numpy as np
import pytest

from krignet import CovarianceParams, FullParams, bessel_k, corr_matrix, matern
from krignet.errors import EnvelopeError
from krignet.kernel import DEFAULT_ENVELOPE

from oracles import bessel_k_quadrature, corr_matrix_oracle


def k_half(x):
    return math.sqrt(math.pi / (2 * x)) * math.exp(-x)


def k_three_halves(x):
    return math.sqrt(math.pi / (2 * x)) * math.exp(-x) * (1 + 1 / x)


def k_five_halves(x):
    return math.sqrt(math.pi / (2 * x)) * math.exp(-x) * (1 + 3 / x + 3 / x**2)


class TestBesselK:
    def test_half_integer_closed_forms(self):
        xs = np.geomspace(1e-3, 30, 400)
        for nu, closed in [(0.5, k_half), (1.5, k_three_halves), (2.5, k_five_halves)]:
            for x in xs:
                ref = closed(x)
                assert abs(bessel_k(nu, x) - ref) <= 1e-10 * ref

    def test_spot_values(self):
        assert bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-12)
        assert bessel_k(1.5, 2.0) == pytest.approx(
            math.sqrt(math.pi / 4) * math.exp(-2) * 1.5, rel=1e-12
        )

    def test_against_quadrature_oracle(self):
        # includes the nu=1.3, x=0.7 case plus random draws
        rng = np.random.default_rng(3)
        cases = [(1.3, 0.7)] + [
            (rng.uniform(0.05, 5.0), 10 ** rng.uniform(-2.5, 1.45)) for _ in range(24)
        ]
        for nu, x in cases:
            ref = bessel_k_quadrature(nu, x)
            assert abs(bessel_k(nu, x) - ref) <= 1e-10 * abs(ref), (nu, x)

    def test_symmetry_in_order(self):
        for nu in (0.3, 0.5, 1.2, 2.5):
            for x in (0.05, 1.0, 7.0):
                assert bessel_k(-nu, x) == bessel_k(nu, x)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bessel_k(0.5, 0.0)
        with pytest.raises(ValueError):
            bessel_k(0.5, -1.0)
        with pytest.raises(ValueError):
            bessel_k(5.5, 1.0)

    def test_near_integer_orders(self):
        # Temme path is delicate when nu approaches an integer
        for nu in (1.0, 2.0, 1.0 + 1e-9, 2.0 - 1e-12, 3.0, 4.0):
            for x in (1e-3, 0.5, 1.9, 2.1, 10.0):
                ref = bessel_k_quadrature(nu, x)
                assert abs(bessel_k(nu, x) - ref) <= 1e-10 * abs(ref)


class TestMatern:
    def test_zero_lag(self):
        assert matern(0.0, 0.1, 1.5) == 1.0
        assert matern(1e-15, 0.1, 0.5) == 1.0

    def test_exponential_reduction(self):
        assert matern(0.1, 0.1, 0.5) == pytest.approx(math.exp(-1), rel=1e-12)

    def test_nu_three_halves_reduction(self):
        assert matern(0.2, 0.1, 1.5) == pytest.approx(3 * math.exp(-2), rel=1e-12)

    def test_range_and_monotonicity(self):
        d = np.linspace(0, 2.0, 400)
        for nu in (0.4, 1.0, 2.6):
            vals = matern(d, 0.08, nu)
            assert np.all(vals > 0) and np.all(vals <= 1)
            assert np.all(np.diff(vals) <= 1e-15)

    def test_array_matches_scalar(self):
        d = np.array([0.0, 0.01, 0.3, 1.4])
        arr = matern(d, 0.05, 1.7)
        for i, di in enumerate(d):
            assert arr[i] == matern(float(di), 0.05, 1.7)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            matern(0.1, -0.1, 0.5)
        with pytest.raises(ValueError):
            matern(-0.1, 0.1, 0.5)
        with pytest.raises(ValueError):
            matern(0.1, 0.1, 0.0)


class TestCorrMatrix:
    def test_single_point(self):
        out = corr_matrix([(0.3, 0.4)], CovarianceParams(0.1, 0.5, 0.8))
        assert out.shape == (1, 1) and out[0, 0] == 1.0

    def test_two_point_value(self):
        theta = CovarianceParams(0.1, 0.5, 0.8)
        out = corr_matrix([(0.0, 0.0), (0.1, 0.0)], theta)
        assert out[0, 1] == pytest.approx(0.8 * math.exp(-1), rel=1e-12)
        assert out[0, 0] == out[1, 1] == 1.0

    def test_pure_nugget_identity(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 1, (8, 2))
        out = corr_matrix(pts, CovarianceParams(0.1, 1.0, 0.0))
        assert np.array_equal(out, np.eye(8))

    def test_symmetric_and_cholesky(self):
        rng = np.random.default_rng(1)
        for nu in (0.5, 1.5, 2.5):
            pts = rng.uniform(0, 1, (150, 2))
            theta = CovarianceParams(0.08, nu, 0.99)
            out = corr_matrix(pts, theta)
            assert np.array_equal(out, out.T)
            np.linalg.cholesky(out)  # must not raise

    def test_matches_scipy_oracle(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(0, 1, (20, 2))
        theta = CovarianceParams(0.06, 1.3, 0.85)
        ref = corr_matrix_oracle(pts, theta)
        got = corr_matrix(pts, theta)
        assert np.max(np.abs(got - ref)) < 1e-12

    def test_size_cap(self):
        pts = np.random.default_rng(3).uniform(0, 1, (10, 2))
        with pytest.raises(ValueError):
            corr_matrix(pts, CovarianceParams(0.1, 1.0, 0.5), max_points=5)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            CovarianceParams(0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            CovarianceParams(0.1, -1.0, 0.5)
        with pytest.raises(ValueError):
            CovarianceParams(0.1, 1.0, 1.5)
        with pytest.raises(ValueError):
            FullParams(0.0, 0.0, CovarianceParams(0.1, 1.0, 0.5))

    def test_envelope(self):
        DEFAULT_ENVELOPE.check(CovarianceParams(0.05, 1.5, 0.5))
        with pytest.raises(EnvelopeError) as exc:
            DEFAULT_ENVELOPE.check(CovarianceParams(0.2, 1.5, 0.5))
        assert exc.value.parameter == "phi"
        with pytest.raises(EnvelopeError) as exc:
            DEFAULT_ENVELOPE.check(CovarianceParams(0.05, 2.9, 0.5))
        assert exc.value.parameter == "nu"
