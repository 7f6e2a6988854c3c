"""Bayesian and frequentist covariance-parameter estimation.

The Metropolis-Hastings sampler updates (phi, nu, r_L) one at a time per
iteration: phi and nu get log-normal candidate distributions (with the
asymmetric-proposal correction in the acceptance ratio), r_L = logit(r) gets
a symmetric normal candidate. Priors follow the shape-rate Gamma /
LogNormal / Normal-on-logit convention, with the Normal prior placed
directly on r_L so no Jacobian enters.

The frequentist path initializes from a binned weighted-least-squares
variogram fit and maximizes the (surrogate or exact) Vecchia log-likelihood
with L-BFGS-B under the training-envelope box constraints.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .errors import FactorizationError, FlatFieldError
from .kernel import DEFAULT_ENVELOPE, CovarianceParams, Envelope, FullParams, matern
from .spatial import LocationSet, OrderedNeighborGraph
from .surrogate import SurrogateBank, SurrogateProvider, select_bin
from .vecchia import WeightProvider, vecchia_loglik

__all__ = [
    "PriorSpec",
    "McmcConfig",
    "Chain",
    "MleConfig",
    "MleResult",
    "VariogramFit",
    "EssResult",
    "logit",
    "inv_logit",
    "log_prior",
    "run_mcmc",
    "fit_variogram",
    "fit_mle",
    "update_beta",
    "update_sigma2",
    "ess",
    "summarize_chain",
    "chain_to_rows",
]

_LOG_2PI = math.log(2.0 * math.pi)


def logit(r: float) -> float:
    if not (0.0 < r < 1.0):
        raise ValueError(f"logit requires r in (0, 1), got {r}")
    return math.log(r / (1.0 - r))


def inv_logit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters.

    phi ~ Gamma(phi_shape, rate=phi_rate); nu ~ LogNormal(nu_log_mean,
    nu_log_sd); r_L = logit(r) ~ Normal(rl_mean, rl_sd). The optional
    regression block uses beta ~ N(0, beta_var I) and sigma2 ~
    InvGamma(sigma2_a, sigma2_b).
    """

    phi_shape: float = 1.5
    phi_rate: float = 30.0
    nu_log_mean: float = 0.5
    nu_log_sd: float = 0.5
    rl_mean: float = 0.0
    rl_sd: float = 1.0
    beta_var: float = 100.0
    sigma2_a: float = 2.0
    sigma2_b: float = 1.0

    def __post_init__(self):
        for name in ("phi_shape", "phi_rate", "nu_log_sd", "rl_sd", "beta_var",
                     "sigma2_a", "sigma2_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def log_prior(theta: CovarianceParams, priors: PriorSpec) -> float:
    """Log prior density of (phi, nu, r_L) at theta; r must lie in (0, 1)."""
    if not (0.0 < theta.r < 1.0):
        raise ValueError(f"r must lie in (0, 1) for the prior, got {theta.r}")
    k, rate = priors.phi_shape, priors.phi_rate
    lp = k * math.log(rate) - math.lgamma(k) + (k - 1.0) * math.log(theta.phi) \
        - rate * theta.phi
    s = priors.nu_log_sd
    zn = (math.log(theta.nu) - priors.nu_log_mean) / s
    lp += -math.log(theta.nu) - math.log(s) - 0.5 * (_LOG_2PI + zn * zn)
    zr = (logit(theta.r) - priors.rl_mean) / priors.rl_sd
    lp += -math.log(priors.rl_sd) - 0.5 * (_LOG_2PI + zr * zr)
    return lp


# ---------------------------------------------------------------------------
# MCMC
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 12_000
    burn_in: int = 2_000
    tune: Union[float, tuple[float, float, float]] = 0.1
    thin: int = 1
    prior_only: bool = False
    init: Optional[tuple[float, float, float]] = None  # (phi, nu, r)
    envelope: Envelope = DEFAULT_ENVELOPE
    adapt: bool = False  # Robbins-Monro scale adaptation during burn-in

    def tunes(self) -> tuple[float, float, float]:
        if isinstance(self.tune, (int, float)):
            return (float(self.tune),) * 3
        t = tuple(float(v) for v in self.tune)
        if len(t) != 3:
            raise ValueError("tune must be a scalar or (phi, nu, r_L) triple")
        return t


@dataclass
class Chain:
    """Stored draws of (phi, nu, r_L) plus acceptance bookkeeping."""

    draws: np.ndarray              # (n_stored, 3): phi, nu, r_L
    log_post: np.ndarray           # (n_stored,)
    bins: np.ndarray               # (n_stored,) int; -1 when prior-only
    accepted: np.ndarray           # (n_stored, 3) int8 flags for that iteration
    accept_counts: dict
    proposal_counts: dict
    envelope_rejects: dict
    burn_in: int                   # stored-index units
    thin: int
    tune: tuple[float, float, float]
    sampling_seconds: float
    betas: Optional[np.ndarray] = None     # (n_stored, p) hierarchical mode
    sigma2s: Optional[np.ndarray] = None   # (n_stored,)

    @property
    def n_stored(self) -> int:
        return self.draws.shape[0]

    def draws_natural(self, post_burn: bool = True) -> np.ndarray:
        """(n, 3) array of (phi, nu, r) on natural scale."""
        d = self.draws[self.burn_in :] if post_burn else self.draws
        out = d.copy()
        out[:, 2] = 1.0 / (1.0 + np.exp(-d[:, 2]))
        return out


_PARAM_NAMES = ("phi", "nu", "r")


def run_mcmc(
    data: Optional[np.ndarray],
    graph: Optional[OrderedNeighborGraph],
    provider: Union[WeightProvider, SurrogateBank, None],
    priors: PriorSpec,
    config: McmcConfig,
    seed: int,
    covariates: Optional[np.ndarray] = None,
) -> Chain:
    """One-at-a-time Metropolis-Hastings over (phi, nu, r_L).

    The likelihood is the Vecchia log-likelihood under ``provider`` (a
    SurrogateBank is wrapped into a SurrogateProvider; bin selection then
    follows the r of each candidate automatically). Candidates outside the
    envelope box are auto-rejected and counted, except in prior-only mode
    where the likelihood (and the envelope) is disabled. When covariates are
    given, conjugate beta and sigma2 Gibbs updates interleave with the MH
    sweeps. Deterministic for a fixed seed.
    """
    if isinstance(provider, SurrogateBank):
        provider = SurrogateProvider(provider)
    prior_only = config.prior_only
    if not prior_only:
        if data is None or graph is None or provider is None:
            raise ValueError("data, graph and provider are required unless prior_only")
        data = np.asarray(data, dtype=float)
    hier = covariates is not None and not prior_only
    if hier:
        x_cov = np.atleast_2d(np.asarray(covariates, dtype=float))
        if x_cov.shape[0] != data.shape[0]:
            raise ValueError("covariate rows must match data length")

    tunes = list(config.tunes())
    env = config.envelope
    # initial state
    if config.init is not None:
        phi, nu, r = config.init
    else:
        phi = priors.phi_shape / priors.phi_rate
        nu = math.exp(priors.nu_log_mean)
        r = inv_logit(priors.rl_mean)
        if not prior_only:
            phi = min(max(phi, env.phi[0]), env.phi[1])
            nu = min(max(nu, env.nu[0]), env.nu[1])
            r = min(max(r, env.r[0]), env.r[1])
    rl = logit(r)

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6D636D63)))
    rng_gibbs = np.random.default_rng(np.random.SeedSequence((seed, 0x67696273)))

    # hierarchical state: beta from OLS, sigma2 from residual variance
    beta = None
    sigma2 = 1.0
    mean_vec = None
    if hier:
        beta, *_ = np.linalg.lstsq(x_cov, data, rcond=None)
        resid = data - x_cov @ beta
        sigma2 = max(float(np.var(resid)), 1e-12)
        mean_vec = x_cov @ beta

    def loglik(theta: CovarianceParams) -> float:
        if prior_only:
            return 0.0
        params = FullParams(0.0, sigma2, theta)
        return vecchia_loglik(data, graph, provider, params, mean=mean_vec)

    cur_theta = CovarianceParams(phi, nu, r)
    cur_ll = loglik(cur_theta)
    cur_lp = log_prior(cur_theta, priors)

    n_iter, thin = config.iterations, max(1, config.thin)
    n_stored = n_iter // thin
    draws = np.empty((n_stored, 3))
    log_post = np.empty(n_stored)
    bins = np.full(n_stored, -1, dtype=np.int32)
    accepted = np.zeros((n_stored, 3), dtype=np.int8)
    betas = np.empty((n_stored, x_cov.shape[1])) if hier else None
    sigma2s = np.empty(n_stored) if hier else None
    acc = {p: 0 for p in _PARAM_NAMES}
    env_rej = {p: 0 for p in _PARAM_NAMES}

    block = 65_536
    t_start = time.perf_counter()
    it = 0
    store_idx = 0
    while it < n_iter:
        todo = min(block, n_iter - it)
        innov = rng.standard_normal((todo, 3))
        unif = rng.random((todo, 3))
        for b in range(todo):
            flags = (0, 0, 0)
            acc_flags = [0, 0, 0]
            for p_idx in range(3):
                hastings = 0.0
                if p_idx == 0:
                    cand_phi = cur_theta.phi * math.exp(tunes[0] * innov[b, 0])
                    cand = (cand_phi, cur_theta.nu, cur_theta.r)
                    hastings = math.log(cand_phi) - math.log(cur_theta.phi)
                elif p_idx == 1:
                    cand_nu = cur_theta.nu * math.exp(tunes[1] * innov[b, 1])
                    cand = (cur_theta.phi, cand_nu, cur_theta.r)
                    hastings = math.log(cand_nu) - math.log(cur_theta.nu)
                else:
                    cand_rl = rl + tunes[2] * innov[b, 2]
                    cand = (cur_theta.phi, cur_theta.nu, inv_logit(cand_rl))
                if not prior_only:
                    name = _PARAM_NAMES[p_idx]
                    lo, hi = (env.phi, env.nu, env.r)[p_idx]
                    value = (cand[0], cand[1], cand[2])[p_idx]
                    if not (lo <= value <= hi):
                        env_rej[name] += 1
                        continue
                try:
                    cand_theta = CovarianceParams(*cand)
                    cand_lp = log_prior(cand_theta, priors)
                except ValueError:
                    continue
                cand_ll = loglik(cand_theta)
                log_ratio = cand_ll + cand_lp - cur_ll - cur_lp + hastings
                if log_ratio >= 0.0 or math.log(unif[b, p_idx]) < log_ratio:
                    cur_theta = cand_theta
                    cur_ll = cand_ll
                    cur_lp = cand_lp
                    if p_idx == 2:
                        rl = cand_rl
                    acc[_PARAM_NAMES[p_idx]] += 1
                    acc_flags[p_idx] = 1
            if hier:
                beta = update_beta(
                    data, x_cov, graph, provider, cur_theta, sigma2, priors,
                    rng_gibbs,
                )
                mean_vec = x_cov @ beta
                sigma2 = update_sigma2(
                    data, x_cov, beta, graph, provider, cur_theta, priors,
                    rng_gibbs,
                )
                cur_ll = loglik(cur_theta)
            if config.adapt and it < config.burn_in:
                gamma = min(0.05, 10.0 / (it + 10.0))
                for p_idx in range(3):
                    tunes[p_idx] *= math.exp(gamma * (acc_flags[p_idx] - 0.44))
            it += 1
            if it % thin == 0:
                draws[store_idx] = (cur_theta.phi, cur_theta.nu, rl)
                log_post[store_idx] = cur_ll + cur_lp
                accepted[store_idx] = acc_flags
                if not prior_only:
                    bins[store_idx] = select_bin(cur_theta.r)
                if hier:
                    betas[store_idx] = beta
                    sigma2s[store_idx] = sigma2
                store_idx += 1
    elapsed = time.perf_counter() - t_start

    return Chain(
        draws=draws,
        log_post=log_post,
        bins=bins,
        accepted=accepted,
        accept_counts=acc,
        proposal_counts={p: n_iter for p in _PARAM_NAMES},
        envelope_rejects=env_rej,
        burn_in=config.burn_in // thin,
        thin=thin,
        tune=tuple(tunes),
        sampling_seconds=elapsed,
        betas=betas,
        sigma2s=sigma2s,
    )


# ---------------------------------------------------------------------------
# Conjugate updates (regression mean and marginal variance)
# ---------------------------------------------------------------------------


def _decorrelated_system(data, covariates, graph, provider, theta):
    """Z*_i = Z_i - sum_j w_ij Z_(i)j and X*_i likewise, in ordering position,
    plus the correlation-scale conditional variances exp(w0)."""
    w, lv = provider.solve(graph, theta)
    z_ord = np.asarray(data, dtype=float)[graph.order]
    x_ord = np.atleast_2d(np.asarray(covariates, dtype=float))[graph.order]
    idx = np.where(graph.neighbors >= 0, graph.neighbors, 0)
    valid = graph.neighbors >= 0
    z_nbr = np.where(valid, z_ord[idx], 0.0)
    z_star = z_ord - np.einsum("nm,nm->n", w, z_nbr)
    x_nbr = np.where(valid[:, :, None], x_ord[idx], 0.0)
    x_star = x_ord - np.einsum("nm,nmp->np", w, x_nbr)
    return z_star, x_star, np.exp(lv)


def update_beta(
    data,
    covariates,
    graph: OrderedNeighborGraph,
    provider: WeightProvider,
    theta: CovarianceParams,
    sigma2: float,
    priors: PriorSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact Gaussian draw from the conditional posterior of beta.

    Posterior precision B = X*' D^-1 X* + I/beta_var and mean
    B^-1 X*' D^-1 Z*, with D = diag(sigma2 exp(w0)).
    """
    z_star, x_star, ew = _decorrelated_system(data, covariates, graph, provider, theta)
    d_inv = 1.0 / (sigma2 * ew)
    xtd = x_star.T * d_inv
    p = x_star.shape[1]
    prec = xtd @ x_star + np.eye(p) / priors.beta_var
    try:
        c, low = sla.cho_factor(prec, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"singular posterior precision for beta: {exc}")
    mean = sla.cho_solve((c, low), xtd @ z_star)
    # draw = mean + L^-T xi with prec = L L'
    xi = rng.standard_normal(p)
    return mean + sla.solve_triangular(c, xi, lower=True, trans="T")


def update_sigma2(
    data,
    covariates,
    beta: np.ndarray,
    graph: OrderedNeighborGraph,
    provider: WeightProvider,
    theta: CovarianceParams,
    priors: PriorSpec,
    rng: np.random.Generator,
) -> float:
    """Inverse-Gamma draw: shape n/2 + a, rate b + sum resid^2/(2 exp(w0))."""
    z_star, x_star, ew = _decorrelated_system(data, covariates, graph, provider, theta)
    resid = z_star - x_star @ np.asarray(beta, dtype=float)
    shape = 0.5 * graph.n + priors.sigma2_a
    rate = priors.sigma2_b + float(np.sum(resid * resid / (2.0 * ew)))
    return 1.0 / rng.gamma(shape, 1.0 / rate)


# ---------------------------------------------------------------------------
# Effective sample size
# ---------------------------------------------------------------------------


class EssResult(NamedTuple):
    ess: float
    degenerate: bool


def ess(draws: np.ndarray, min_draws: int = 100) -> EssResult:
    """Effective sample size via Geyer's initial positive sequence.

    A constant chain reports ESS 1 with the degenerate flag; the truncation
    rule guarantees ESS <= n.
    """
    x = np.asarray(draws, dtype=float).ravel()
    n = x.shape[0]
    if n < min_draws:
        raise ValueError(f"need at least {min_draws} draws, got {n}")
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var <= 0.0 or not math.isfinite(var):
        return EssResult(1.0, True)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    tau = 0.0
    k = 0
    while 2 * k + 1 < n:
        gamma_k = rho[2 * k] + rho[2 * k + 1]
        if gamma_k <= 0.0:
            break
        tau += 2.0 * gamma_k
        k += 1
    tau = max(tau - 1.0, 1.0)
    return EssResult(min(n / tau, float(n)), False)


# ---------------------------------------------------------------------------
# Variogram initialization
# ---------------------------------------------------------------------------


class VariogramFit(NamedTuple):
    phi: float
    nu: float
    r: float


_VARIOGRAM_BINS = 15
_VARIOGRAM_QUANTILE = 0.3
_MAX_EXACT_PAIRS = 12_500_000  # all pairs up to n = 5000


def fit_variogram(
    data,
    locs: Union[LocationSet, np.ndarray],
    bounds: Sequence[tuple[float, float]] = DEFAULT_ENVELOPE.bounds(),
    seed: int = 0,
) -> VariogramFit:
    """Initial (phi, nu, r) from a binned empirical semivariogram.

    The semivariogram of the standardized data is fit by weighted least
    squares (bin-count weights) against gamma(d) = 1 - r K(d) over a coarse
    parameter grid, refined once; results are clamped to ``bounds``. Pairs
    are subsampled above 5000 sites.
    """
    z = np.asarray(data, dtype=float)
    coords = locs.coords if isinstance(locs, LocationSet) else np.asarray(locs, float)
    n = z.shape[0]
    if n < 50:
        raise ValueError(f"variogram initialization needs n >= 50, got {n}")
    sd = float(np.std(z))
    if sd < 1e-12:
        raise FlatFieldError("data variance is (near) zero")
    zs = (z - z.mean()) / sd

    if n * (n - 1) // 2 <= _MAX_EXACT_PAIRS:
        iu, ju = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x76617269)))
        n_pairs = _MAX_EXACT_PAIRS
        iu = rng.integers(0, n, n_pairs)
        ju = rng.integers(0, n - 1, n_pairs)
        ju = np.where(ju >= iu, ju + 1, ju)
    d = np.sqrt(np.sum((coords[iu] - coords[ju]) ** 2, axis=1))
    sq = 0.5 * (zs[iu] - zs[ju]) ** 2

    d_cut = np.quantile(d, _VARIOGRAM_QUANTILE)
    keep = d <= d_cut
    d, sq = d[keep], sq[keep]
    edges = np.linspace(0.0, d_cut, _VARIOGRAM_BINS + 1)
    which = np.clip(np.digitize(d, edges) - 1, 0, _VARIOGRAM_BINS - 1)
    counts = np.bincount(which, minlength=_VARIOGRAM_BINS).astype(float)
    sums = np.bincount(which, weights=sq, minlength=_VARIOGRAM_BINS)
    nonempty = counts > 0
    centers = 0.5 * (edges[:-1] + edges[1:])[nonempty]
    gamma_hat = sums[nonempty] / counts[nonempty]
    wts = counts[nonempty]

    (phi_lo, phi_hi), (nu_lo, nu_hi), (r_lo, r_hi) = bounds

    def wls(phi_grid, nu_grid, r_grid):
        best = (math.inf, None)
        for phi in phi_grid:
            for nu in nu_grid:
                kvals = matern(centers, phi, nu)
                for r in r_grid:
                    resid = gamma_hat - (1.0 - r * kvals)
                    loss = float(np.sum(wts * resid * resid))
                    if loss < best[0]:
                        best = (loss, (phi, nu, r))
        return best[1]

    coarse = wls(
        np.geomspace(phi_lo, phi_hi, 13),
        np.linspace(nu_lo, nu_hi, 9),
        np.linspace(r_lo, r_hi, 12),
    )
    phi0, nu0, r0 = coarse
    fine = wls(
        np.clip(np.geomspace(phi0 / 1.8, phi0 * 1.8, 9), phi_lo, phi_hi),
        np.clip(np.linspace(nu0 - 0.35, nu0 + 0.35, 9), nu_lo, nu_hi),
        np.clip(np.linspace(r0 - 0.08, r0 + 0.08, 9), r_lo, r_hi),
    )
    phi_v, nu_v, r_v = fine
    return VariogramFit(
        float(min(max(phi_v, phi_lo), phi_hi)),
        float(min(max(nu_v, nu_lo), nu_hi)),
        float(min(max(r_v, r_lo), r_hi)),
    )


# ---------------------------------------------------------------------------
# Frequentist estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MleConfig:
    tol: float = 1e-7
    bounds: tuple = ((0.005, 0.12), (0.3, 2.7), (0.18, 0.99))
    max_iterations: int = 500
    fd_rel_step: float = 1e-5


@dataclass(frozen=True)
class MleResult:
    phi: float
    nu: float
    r: float
    converged: bool
    iterations: int
    objective: float  # final log-likelihood
    init: tuple[float, float, float]
    bin_sequence: tuple[int, ...] = ()

    @property
    def theta(self) -> CovarianceParams:
        return CovarianceParams(self.phi, self.nu, self.r)


def fit_mle(
    data,
    graph: OrderedNeighborGraph,
    provider: Union[WeightProvider, SurrogateBank],
    config: MleConfig = MleConfig(),
    init: Optional[tuple[float, float, float]] = None,
    mu: float = 0.0,
    sigma2: float = 1.0,
) -> MleResult:
    """Bounded quasi-Newton maximization of the Vecchia log-likelihood.

    Gradients come from central finite differences. With a surrogate bank,
    the bin is fixed from the initial r during optimization; if the optimum
    lands in a different bin, the fit is rerun once from there.
    """
    data = np.asarray(data, dtype=float)
    if init is None:
        coords = np.empty_like(graph.coords_ordered)
        coords[graph.order] = graph.coords_ordered
        init = tuple(fit_variogram(data, coords, bounds=config.bounds))
    bank = provider if isinstance(provider, SurrogateBank) else None
    bin_seq = []

    def one_fit(x0, fixed_bin):
        if bank is not None:
            prov = SurrogateProvider(bank, fixed_bin=fixed_bin)
        else:
            prov = provider

        def neg_loglik(x):
            theta = CovarianceParams(*x)
            params = FullParams(mu, sigma2, theta)
            return -vecchia_loglik(data, graph, prov, params)

        res = minimize(
            neg_loglik,
            np.asarray(x0, dtype=float),
            method="L-BFGS-B",
            jac="3-point",
            bounds=list(config.bounds),
            options={
                "ftol": config.tol,
                "maxiter": config.max_iterations,
                "finite_diff_rel_step": config.fd_rel_step,
            },
        )
        return res

    x0 = np.clip(
        np.asarray(init, dtype=float),
        [b[0] for b in config.bounds],
        [b[1] for b in config.bounds],
    )
    fixed_bin = select_bin(float(x0[2])) if bank is not None else None
    if fixed_bin is not None:
        bin_seq.append(fixed_bin)
    res = one_fit(x0, fixed_bin)
    if bank is not None:
        new_bin = select_bin(float(res.x[2]))
        if new_bin != fixed_bin:
            bin_seq.append(new_bin)
            res = one_fit(res.x, new_bin)
    converged = bool(res.success) and res.status != 1
    return MleResult(
        float(res.x[0]),
        float(res.x[1]),
        float(res.x[2]),
        converged,
        int(res.nit),
        -float(res.fun),
        tuple(float(v) for v in init),
        tuple(bin_seq),
    )


# ---------------------------------------------------------------------------
# Chain reporting
# ---------------------------------------------------------------------------


def summarize_chain(chain: Chain, sampling_minutes: Optional[float] = None) -> dict:
    """Posterior means, 95% credible intervals (empirical quantiles), ESS and
    ESS per minute for (phi, nu, r)."""
    nat = chain.draws_natural(post_burn=True)
    if sampling_minutes is None:
        sampling_minutes = chain.sampling_seconds / 60.0
    out = {"n_draws": int(nat.shape[0]), "sampling_minutes": sampling_minutes}
    for j, name in enumerate(_PARAM_NAMES):
        col = nat[:, j]
        e = ess(col)
        out[name] = {
            "mean": float(col.mean()),
            "ci_2.5": float(np.quantile(col, 0.025)),
            "ci_97.5": float(np.quantile(col, 0.975)),
            "ess": e.ess,
            "ess_degenerate": e.degenerate,
            "ess_per_min": e.ess / sampling_minutes if sampling_minutes > 0 else float("nan"),
            "acceptance": chain.accept_counts[name] / max(chain.proposal_counts[name], 1),
        }
    return out


def chain_to_rows(chain: Chain):
    """Rows (iteration, phi, nu, r, log_posterior, bin, acc flags) for CSV export."""
    nat = chain.draws_natural(post_burn=False)
    for s in range(chain.n_stored):
        yield (
            (s + 1) * chain.thin,
            nat[s, 0],
            nat[s, 1],
            nat[s, 2],
            chain.log_post[s],
            int(chain.bins[s]),
            int(chain.accepted[s, 0]),
            int(chain.accepted[s, 1]),
            int(chain.accepted[s, 2]),
        )
