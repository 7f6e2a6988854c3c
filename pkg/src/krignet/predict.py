"""Kriging prediction at unobserved sites from fixed parameters or from
thinned posterior draws.

Test sites condition on their m nearest training sites (prediction uses
observed data only, so no max-min extension is involved) and are mutually
independent given the training data. The exact solve is used by default;
amortization buys little here because only n_test small systems arise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from . import _fastpath as _fp
from .errors import FactorizationError
from .inference import Chain
from .kernel import CovarianceParams

__all__ = ["PredictionResult", "predict_sites", "predict_bayes"]


@dataclass(frozen=True)
class PredictionResult:
    """Predictive means/variances per test site.

    In Bayesian mode ``draw_means``/``draw_variances`` hold the per-draw
    results and mean/variance are pooled by the law of total variance.
    ``coincident`` flags test sites that exactly duplicate a training site
    (handled by the interpolation shortcut: mean = observed value, variance
    = the nugget floor sigma2*(1-r)).
    """

    mean: np.ndarray
    variance: np.ndarray
    coincident: np.ndarray
    stride: Optional[int] = None
    draw_means: Optional[np.ndarray] = None
    draw_variances: Optional[np.ndarray] = None


def _neighbor_table(train_coords, test_coords, m):
    tree = cKDTree(train_coords)
    k = min(m, train_coords.shape[0])
    dd, ii = tree.query(test_coords, k=k)
    if k == 1:
        dd, ii = dd[:, None], ii[:, None]
    # deterministic (distance, index) order
    d2 = np.sum(
        (train_coords[ii] - test_coords[:, None, :]) ** 2, axis=2
    )
    for row in range(ii.shape[0]):
        sel = np.lexsort((ii[row], d2[row]))
        ii[row] = ii[row][sel]
        dd[row] = np.sqrt(d2[row][sel])
    nbr = np.ascontiguousarray(ii.astype(np.int64))
    return nbr, dd


def predict_sites(
    train_z,
    train_coords,
    test_coords,
    theta: CovarianceParams,
    mu: float = 0.0,
    sigma2: float = 1.0,
    m: int = 30,
    _nbr: Optional[np.ndarray] = None,
    _coincident: Optional[np.ndarray] = None,
) -> PredictionResult:
    """Exact Kriging prediction at test sites given fixed parameters.

    mean = mu + sum_j w_j (Z_j - mu) and variance = sigma2 * exp(w0), each
    test site conditioned on its m nearest training sites.
    """
    z = np.asarray(train_z, dtype=float)
    tc = np.ascontiguousarray(np.asarray(train_coords, dtype=float))
    xc = np.ascontiguousarray(np.asarray(test_coords, dtype=float).reshape(-1, 2))
    if m > tc.shape[0]:
        raise ValueError(f"m={m} exceeds the {tc.shape[0]} training sites")
    if _nbr is None:
        nbr, dd = _neighbor_table(tc, xc, m)
        coincident = dd[:, 0] == 0.0
    else:
        nbr, coincident = _nbr, _coincident
    mean = np.empty(xc.shape[0])
    var = np.empty(xc.shape[0])
    status = _fp.predict_batch(
        tc, z, xc, nbr, theta.phi, theta.nu, theta.r, mu, sigma2, mean, var
    )
    if status != 0:
        raise FactorizationError(f"prediction failed at test site {status - 1}")
    if coincident.any():
        hit = nbr[coincident, 0]
        mean[coincident] = z[hit]
        var[coincident] = sigma2 * (1.0 - theta.r)
    return PredictionResult(mean, var, coincident)


def predict_bayes(
    train_z,
    train_coords,
    test_coords,
    chain: Chain,
    stride: int = 50,
    m: int = 30,
    mu: float = 0.0,
    sigma2: float = 1.0,
) -> PredictionResult:
    """Prediction pooled over every ``stride``-th post-burn-in draw.

    Pooled mean is the average of per-draw means; pooled variance is the
    mean of per-draw variances plus the variance of per-draw means.
    """
    nat = chain.draws_natural(post_burn=True)
    if nat.shape[0] < 1:
        raise ValueError("chain has no post-burn-in draws")
    thinned = nat[::stride]
    if thinned.shape[0] == 0:
        raise ValueError(f"no draws left after thinning by {stride}")
    z = np.asarray(train_z, dtype=float)
    tc = np.ascontiguousarray(np.asarray(train_coords, dtype=float))
    xc = np.ascontiguousarray(np.asarray(test_coords, dtype=float).reshape(-1, 2))
    nbr, dd = _neighbor_table(tc, xc, m)
    coincident = dd[:, 0] == 0.0
    means = np.empty((thinned.shape[0], xc.shape[0]))
    variances = np.empty_like(means)
    for d, (phi, nu, r) in enumerate(thinned):
        res = predict_sites(
            z, tc, xc, CovarianceParams(phi, nu, r), mu, sigma2, m,
            _nbr=nbr, _coincident=coincident,
        )
        means[d] = res.mean
        variances[d] = res.variance
    pooled_mean = means.mean(axis=0)
    pooled_var = variances.mean(axis=0) + means.var(axis=0)
    return PredictionResult(
        pooled_mean,
        pooled_var,
        coincident,
        stride=stride,
        draw_means=means,
        draw_variances=variances,
    )
