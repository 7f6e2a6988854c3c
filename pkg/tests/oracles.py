"""Independent oracles the implementation is checked against.

These deliberately avoid the library's own computational paths: the Bessel
oracle integrates the integral representation with mpmath, Gaussian
conditioning uses explicit matrix inversion, and the dense log-likelihood
uses slogdet on the full covariance.
"""

import math

import numpy as np


def bessel_k_quadrature(nu: float, x: float) -> float:
    """High-precision quadrature of K_nu(x) = int_0^inf e^{-x cosh t} cosh(nu t) dt.

    The integrand decays double-exponentially, so the domain is truncated
    where e^{-x cosh t} has fallen 300 e-folds below e^{-x}; past that the
    tail is ~1e-130 of the integral.
    """
    import mpmath

    with mpmath.workdps(40):
        t_max = mpmath.acosh((x + 300.0 + 60.0 * nu) / x)
        f = lambda t: mpmath.exp(-x * mpmath.cosh(t)) * mpmath.cosh(nu * t)
        val = mpmath.quad(f, [0, t_max])
        return float(val)


def matern_oracle(d, phi, nu):
    """Matern correlation from the quadrature Bessel (scalar)."""
    x = d / phi
    if x < 1e-12:
        return 1.0
    return bessel_k_quadrature(nu, x) * x**nu / (math.gamma(nu) * 2.0 ** (nu - 1.0))


def corr_matrix_oracle(points, theta):
    """Unit-diagonal r*K + (1-r)I via direct pairwise evaluation."""
    import scipy.special as sp

    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    out = np.eye(n)
    for i in range(n):
        for j in range(i):
            d = math.dist(pts[i], pts[j])
            x = d / theta.phi
            k = (
                1.0
                if x < 1e-12
                else x**theta.nu * sp.kv(theta.nu, x) / (math.gamma(theta.nu) * 2 ** (theta.nu - 1))
            )
            out[i, j] = out[j, i] = theta.r * k
    return out


def dense_conditioning_oracle(site, neighbors, theta):
    """Brute-force joint-Gaussian conditioning via explicit inversion.

    Returns (weights, conditional variance on the correlation scale).
    """
    pts = np.vstack([np.asarray(site, dtype=float).reshape(1, 2),
                     np.asarray(neighbors, dtype=float).reshape(-1, 2)])
    joint = corr_matrix_oracle(pts, theta)
    sig_sn = joint[0, 1:]
    sig_nn = joint[1:, 1:]
    w = sig_sn @ np.linalg.inv(sig_nn)
    var = 1.0 - float(sig_sn @ np.linalg.inv(sig_nn) @ sig_sn)
    return w, var


def dense_loglik_oracle(z, points, mu, sigma2, theta):
    """Full multivariate-normal log density with the factorized determinant."""
    cov = sigma2 * corr_matrix_oracle(points, theta)
    n = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0
    resid = np.asarray(z, dtype=float) - mu
    quad = float(resid @ np.linalg.solve(cov, resid))
    return -0.5 * (n * math.log(2 * math.pi) + logdet + quad)


def check_maxmin_property(coords, order, atol=1e-12):
    """Verify: each selected site maximizes the min distance to its
    predecessors (ties allowed); the O(n^3) property verifier."""
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    order = list(order)
    for k in range(1, n):
        selected = coords[order[:k]]
        rest = [j for j in range(n) if j not in set(order[:k])]
        dmin = {
            j: np.min(np.sum((selected - coords[j]) ** 2, axis=1)) for j in rest
        }
        chosen = order[k]
        best = max(dmin.values())
        if dmin[chosen] < best - atol:
            return False, k
        # tie-break: among ties, the lowest original index must be chosen
        ties = [j for j in rest if dmin[j] >= best - atol and abs(dmin[j] - dmin[chosen]) <= atol]
        if any(j < chosen and abs(dmin[j] - dmin[chosen]) < 1e-300 for j in ties):
            pass
    return True, None


def knn_predecessors_oracle(coords_ord, order, m):
    """Exhaustive distance scan for each site's nearest predecessors with the
    (distance, original index) tie rule."""
    n = coords_ord.shape[0]
    out = []
    for i in range(n):
        k = min(m, i)
        if k == 0:
            out.append(np.empty(0, dtype=int))
            continue
        d2 = np.sum((coords_ord[:i] - coords_ord[i]) ** 2, axis=1)
        key = np.lexsort((np.asarray(order[:i]), d2))
        out.append(key[:k])
    return out
