"""Matern correlation of real order and the parameter containers.

The correlation model is

    Cor(Z_i, Z_j) = r * K(d_ij),
    K(d) = 1 / (Gamma(nu) 2^(nu-1)) * (d/phi)^nu * BesselK_nu(d/phi),

with spatial range phi > 0, smoothness nu > 0 and proportion of spatial
variance r in [0, 1]; the remaining (1 - r) of the marginal variance is a
spatially uncorrelated nugget. Note there is no sqrt(2 nu) rescaling of the
distance in this parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _fastpath as _fp
from .errors import EnvelopeError

__all__ = [
    "CovarianceParams",
    "FullParams",
    "Envelope",
    "DEFAULT_ENVELOPE",
    "bessel_k",
    "matern",
    "corr_matrix",
]


@dataclass(frozen=True)
class CovarianceParams:
    """Correlation parameters (phi, nu, r)."""

    phi: float
    nu: float
    r: float

    def __post_init__(self):
        if not (self.phi > 0):
            raise ValueError(f"phi must be > 0, got {self.phi}")
        if not (self.nu > 0):
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if not (0.0 <= self.r <= 1.0):
            raise ValueError(f"r must lie in [0, 1], got {self.r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.phi, self.nu, self.r)


@dataclass(frozen=True)
class FullParams:
    """Marginal mean/variance plus correlation parameters.

    ``beta`` holds optional regression coefficients when a covariate mean
    model is used; the GP itself then applies to the regression residuals.
    """

    mu: float
    sigma2: float
    theta: CovarianceParams
    beta: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.sigma2 > 0):
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.beta is not None:
            object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))


@dataclass(frozen=True)
class Envelope:
    """Box of covariance parameters the surrogate networks were trained for."""

    phi: tuple[float, float] = (0.005, 0.12)
    nu: tuple[float, float] = (0.3, 2.7)
    r: tuple[float, float] = (0.18, 0.99)

    def check(self, theta: CovarianceParams) -> None:
        """Raise EnvelopeError naming the first offending parameter."""
        for name, value, (lo, hi) in (
            ("phi", theta.phi, self.phi),
            ("nu", theta.nu, self.nu),
            ("r", theta.r, self.r),
        ):
            if not (lo <= value <= hi):
                raise EnvelopeError(name, value, lo, hi)

    def contains(self, theta: CovarianceParams) -> bool:
        try:
            self.check(theta)
        except EnvelopeError:
            return False
        return True

    def bounds(self) -> list[tuple[float, float]]:
        return [self.phi, self.nu, self.r]


DEFAULT_ENVELOPE = Envelope()

_NU_MAX = 5.0


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x).

    Self-contained evaluation (Temme series for x <= 2, continued fraction
    for x > 2, upward recurrence in the order), symmetric in nu. Valid for
    0 < |nu| <= 5 and x > 0; relative accuracy is ~1e-13 over the range the
    correlation model uses.
    """
    if not (x > 0.0):
        raise ValueError(f"bessel_k requires x > 0, got {x}")
    anu = abs(float(nu))
    if anu > _NU_MAX:
        raise ValueError(f"bessel_k supports |nu| <= {_NU_MAX}, got {nu}")
    return _fp.kv_scalar(anu, float(x))


def matern(d, phi: float, nu: float):
    """Matern correlation K(d) as defined in the module docstring.

    ``d`` may be a scalar or an ndarray of nonnegative distances; the value
    at zero lag is exactly 1.
    """
    if not (phi > 0):
        raise ValueError(f"phi must be > 0, got {phi}")
    if not (0 < nu <= _NU_MAX):
        raise ValueError(f"nu must lie in (0, {_NU_MAX}], got {nu}")
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0):
        raise ValueError("distances must be nonnegative")
    flat = np.ravel(arr)
    out = np.empty(flat.shape[0])
    _fp.matern_many(flat, float(phi), float(nu), out)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def corr_matrix(points, theta: CovarianceParams, max_points: int = 2048) -> np.ndarray:
    """Correlation-scale matrix r*K + (1-r)*I with unit diagonal.

    This is the dense small-matrix path used by the exact Kriging solves;
    ``max_points`` guards against accidentally requesting an O(n^2) matrix
    on a full dataset. Duplicate points with r = 1 make the result singular,
    which surfaces as a factorization error in the caller.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {pts.shape}")
    n = pts.shape[0]
    if n > max_points:
        raise ValueError(
            f"corr_matrix limited to {max_points} points (got {n}); "
            "use the Vecchia path for large n"
        )
    out = np.empty((n, n))
    _fp.corr_matrix_fill(pts, theta.phi, theta.nu, theta.r, out)
    return out


def matern_reference(d: float, phi: float, nu: float) -> float:
    """Scalar Matern correlation via math.gamma and bessel_k (no numba path
    sharing beyond the Bessel core); kept for cross-checks."""
    x = d / phi
    if x < 1e-12:
        return 1.0
    c = 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))
    return min(1.0, c * x**nu * bessel_k(nu, x))
