"""Compiled inner loops: Bessel K_nu, Matern evaluation, batched Kriging
solves, sequential field simulation, max-min ordering, and the piecewise
Chebyshev correlation tables used by the fast likelihood path.

Everything here is deterministic: loops fill per-site output slots, so the
results do not depend on the numba thread schedule.
"""

import math

import numpy as np
from numba import njit

# Taylor coefficients of 1/Gamma(z) = sum_k c_k z^k (Abramowitz & Stegun
# 6.1.34), so 1/Gamma(1+z) = sum_j c_{j+1} z^j.
_INV_GAMMA_C = np.array([
    1.00000000000000000000e0,
    0.57721566490153286061e0,
    -0.65587807152025388108e0,
    -0.04200263503409523553e0,
    0.16653861138229148950e0,
    -0.04219773455554433675e0,
    -0.00962197152787697356e0,
    0.00721894324666309954e0,
    -0.00116516759185906511e0,
    -0.00021524167411495097e0,
    0.00012805028238811619e0,
    -0.00002013485478078824e0,
    -0.00000125049348214267e0,
    0.00000113302723198170e0,
    -0.00000020563384169776e0,
    0.00000000611609510448e0,
    0.00000000500200764447e0,
    -0.00000000118127457049e0,
])


@njit(cache=True)
def _gam_pair(mu):
    """Temme's Gamma combinations for |mu| <= 0.5.

    Returns (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) where
    gam1 = [1/Gamma(1-mu) - 1/Gamma(1+mu)] / (2 mu) taken in the limit for
    small mu to avoid cancellation.
    """
    gampl = 0.0
    gammi = 0.0
    zp = 1.0
    zm = 1.0
    for j in range(_INV_GAMMA_C.shape[0]):
        a = _INV_GAMMA_C[j]
        gampl += a * zp
        gammi += a * zm
        zp *= mu
        zm *= -mu
    gam2 = 0.5 * (gammi + gampl)
    if abs(mu) < 0.1:
        s = 0.0
        mu2 = mu * mu
        p = 1.0
        for j in range(1, _INV_GAMMA_C.shape[0], 2):
            s += _INV_GAMMA_C[j] * p
            p *= mu2
        gam1 = -s
    else:
        gam1 = (gammi - gampl) / (2.0 * mu)
    return gam1, gam2, gampl, gammi


@njit(cache=True)
def kv_scalar(nu, x):
    """Modified Bessel function of the second kind, real order nu >= 0, x > 0.

    Temme's series for x <= 2, a Steed/Thompson-Barnett continued fraction
    for x > 2, then upward recurrence from order mu = nu - round(nu).
    """
    nl = int(nu + 0.5)
    mu = nu - nl
    xi = 1.0 / x
    xi2 = 2.0 * xi
    if x <= 2.0:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = pimu / math.sin(pimu) if abs(pimu) > 1e-30 else 1.0
        d = -math.log(x2)
        e = mu * d
        fact2 = math.sinh(e) / e if abs(e) > 1e-30 else 1.0
        gam1, gam2, gampl, gammi = _gam_pair(mu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        summ = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d2 = x2 * x2
        sum1 = p
        mu2 = mu * mu
        for i in range(1, 30000):
            ff = (i * ff + p + q) / (i * i - mu2)
            c *= d2 / i
            p /= (i - mu)
            q /= (i + mu)
            dl = c * ff
            summ += dl
            sum1 += c * (p - i * ff)
            if abs(dl) < abs(summ) * 1e-16:
                break
        rkmu = summ
        rk1 = sum1 * xi2
    else:
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = d
        delh = d
        q1 = 0.0
        q2 = 1.0
        a1 = 0.25 - mu * mu
        q = a1
        c = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(2, 30000):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q += c * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if abs(dels / s) < 1e-16:
                break
        h = a1 * h
        rkmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
        rk1 = rkmu * (mu + x + 0.5 - h) * xi
    for _l in range(1, nl + 1):
        rkt = (mu + _l) * xi2 * rk1 + rkmu
        rkmu = rk1
        rk1 = rkt
    return rkmu


@njit(cache=True)
def matern_scalar(d, phi, nu, c_nu):
    """Matern correlation with precomputed c_nu = 1/(Gamma(nu) 2^(nu-1))."""
    x = d / phi
    if x < 1e-12:
        return 1.0
    v = c_nu * x ** nu * kv_scalar(nu, x)
    # guard against rounding just above 1 at tiny positive lags
    return v if v < 1.0 else 1.0


@njit(cache=True)
def matern_many(d, phi, nu, out):
    c_nu = 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))
    for i in range(d.shape[0]):
        out[i] = matern_scalar(d[i], phi, nu, c_nu)


@njit(cache=True)
def corr_matrix_fill(pts, phi, nu, r, out):
    """out <- r*K(d_ij) off-diagonal, unit diagonal."""
    n = pts.shape[0]
    c_nu = 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            v = r * matern_scalar(math.sqrt(dx * dx + dy * dy), phi, nu, c_nu)
            out[i, j] = v
            out[j, i] = v


@njit(cache=True)
def _chol_in_place(M, k):
    """Lower Cholesky of M[:k,:k] in place; returns 0 or the failing pivot+1."""
    for a in range(k):
        s = M[a, a]
        for t in range(a):
            s -= M[a, t] * M[a, t]
        if s <= 0.0:
            return a + 1
        la = math.sqrt(s)
        M[a, a] = la
        inv = 1.0 / la
        for b in range(a + 1, k):
            s2 = M[b, a]
            for t in range(a):
                s2 -= M[b, t] * M[a, t]
            M[b, a] = s2 * inv
    return 0


@njit(cache=True)
def _forward_solve(M, rhs, k, out):
    for a in range(k):
        s = rhs[a]
        for t in range(a):
            s -= M[a, t] * out[t]
        out[a] = s / M[a, a]


@njit(cache=True)
def _back_solve_t(M, rhs, k, out):
    """Solve L^T out = rhs for lower-triangular L stored in M."""
    for a in range(k - 1, -1, -1):
        s = rhs[a]
        for t in range(a + 1, k):
            s -= M[t, a] * out[t]
        out[a] = s / M[a, a]


@njit(cache=True)
def solve_exact_batch(coords, nbr, nlen, phi, nu, r, w_out, lv_out):
    """Exact Kriging weights and log conditional variance for every site.

    coords are in ordering position; nbr holds ordered-position neighbor
    indices (-1 padded). Returns 0 on success or (site index + 1) whose
    correlation matrix failed to factorize.
    """
    n = coords.shape[0]
    m = nbr.shape[1]
    c_nu = 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))
    M = np.empty((m, m))
    k0 = np.empty(m)
    y = np.empty(m)
    for i in range(n):
        k = nlen[i]
        lv_out[i] = 0.0
        for a in range(m):
            w_out[i, a] = 0.0
        if k == 0:
            continue
        xi0 = coords[i, 0]
        xi1 = coords[i, 1]
        for a in range(k):
            ja = nbr[i, a]
            dx = coords[ja, 0] - xi0
            dy = coords[ja, 1] - xi1
            k0[a] = r * matern_scalar(math.sqrt(dx * dx + dy * dy), phi, nu, c_nu)
            M[a, a] = 1.0
            for b in range(a):
                jb = nbr[i, b]
                ex = coords[ja, 0] - coords[jb, 0]
                ey = coords[ja, 1] - coords[jb, 1]
                cv = r * matern_scalar(math.sqrt(ex * ex + ey * ey), phi, nu, c_nu)
                M[a, b] = cv
                M[b, a] = cv
        if _chol_in_place(M, k) != 0:
            return i + 1
        _forward_solve(M, k0, k, y)
        qf = 0.0
        for a in range(k):
            qf += y[a] * y[a]
        ev = 1.0 - qf
        if ev <= 0.0:
            return i + 1
        _back_solve_t(M, y, k, k0)  # k0 now holds the weights
        for a in range(k):
            w_out[i, a] = k0[a]
        lv_out[i] = math.log(ev)
    return 0


@njit(cache=True)
def simulate_seq(coords, nbr, nlen, phi, nu, r, mu_m, sigma2, eps, z_out):
    """Sequential conditional draw in ordering position; eps ~ N(0,1) i.i.d.

    Returns 0 on success or (site index + 1) on factorization failure.
    """
    n = coords.shape[0]
    m = nbr.shape[1]
    c_nu = 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))
    M = np.empty((m, m))
    k0 = np.empty(m)
    y = np.empty(m)
    w = np.empty(m)
    for i in range(n):
        k = nlen[i]
        if k == 0:
            z_out[i] = mu_m + math.sqrt(sigma2) * eps[i]
            continue
        xi0 = coords[i, 0]
        xi1 = coords[i, 1]
        for a in range(k):
            ja = nbr[i, a]
            dx = coords[ja, 0] - xi0
            dy = coords[ja, 1] - xi1
            k0[a] = r * matern_scalar(math.sqrt(dx * dx + dy * dy), phi, nu, c_nu)
            M[a, a] = 1.0
            for b in range(a):
                jb = nbr[i, b]
                ex = coords[ja, 0] - coords[jb, 0]
                ey = coords[ja, 1] - coords[jb, 1]
                cv = r * matern_scalar(math.sqrt(ex * ex + ey * ey), phi, nu, c_nu)
                M[a, b] = cv
                M[b, a] = cv
        if _chol_in_place(M, k) != 0:
            return i + 1
        _forward_solve(M, k0, k, y)
        qf = 0.0
        for a in range(k):
            qf += y[a] * y[a]
        ev = 1.0 - qf
        if ev <= 0.0:
            return i + 1
        _back_solve_t(M, y, k, w)
        cm = mu_m
        for a in range(k):
            cm += w[a] * (z_out[nbr[i, a]] - mu_m)
        z_out[i] = cm + math.sqrt(sigma2 * ev) * eps[i]
    return 0


@njit(cache=True)
def maxmin_order_core(coords, start):
    """Exact max-min ordering from a fixed start; ties to lowest index."""
    n = coords.shape[0]
    order = np.empty(n, dtype=np.int64)
    mind = np.full(n, np.inf)
    chosen = np.zeros(n, dtype=np.bool_)
    order[0] = start
    chosen[start] = True
    last = start
    for step in range(1, n):
        lx = coords[last, 0]
        ly = coords[last, 1]
        best = -1.0
        arg = -1
        for j in range(n):
            if chosen[j]:
                continue
            dx = coords[j, 0] - lx
            dy = coords[j, 1] - ly
            d2 = dx * dx + dy * dy
            if d2 < mind[j]:
                mind[j] = d2
            if mind[j] > best:
                best = mind[j]
                arg = j
        order[step] = arg
        chosen[arg] = True
        last = arg
    return order


@njit(cache=True)
def knn_predecessors_brute(coords, tb, m, nbr_out, nlen_out):
    """For each ordering position i, the min(m, i) nearest earlier positions
    in nondecreasing distance; exact distance ties break on the smaller
    tiebreak value tb[j] (the site's original index)."""
    n = coords.shape[0]
    dbuf = np.empty(m)
    ibuf = np.empty(m, dtype=np.int64)
    for i in range(n):
        k = min(m, i)
        nlen_out[i] = k
        for a in range(m):
            nbr_out[i, a] = -1
        if k == 0:
            continue
        cnt = 0
        xi0 = coords[i, 0]
        xi1 = coords[i, 1]
        for j in range(i):
            dx = coords[j, 0] - xi0
            dy = coords[j, 1] - xi1
            d2 = dx * dx + dy * dy
            if cnt < k:
                pos = cnt
                while pos > 0 and (
                    dbuf[pos - 1] > d2
                    or (dbuf[pos - 1] == d2 and tb[ibuf[pos - 1]] > tb[j])
                ):
                    dbuf[pos] = dbuf[pos - 1]
                    ibuf[pos] = ibuf[pos - 1]
                    pos -= 1
                dbuf[pos] = d2
                ibuf[pos] = j
                cnt += 1
            elif d2 < dbuf[k - 1] or (
                d2 == dbuf[k - 1] and tb[j] < tb[ibuf[k - 1]]
            ):
                pos = k - 1
                while pos > 0 and (
                    dbuf[pos - 1] > d2
                    or (dbuf[pos - 1] == d2 and tb[ibuf[pos - 1]] > tb[j])
                ):
                    dbuf[pos] = dbuf[pos - 1]
                    ibuf[pos] = ibuf[pos - 1]
                    pos -= 1
                dbuf[pos] = d2
                ibuf[pos] = j
        for a in range(k):
            nbr_out[i, a] = ibuf[a]


@njit(cache=True)
def predict_batch(train_coords, z, test_coords, nbr, phi, nu, r, mu_m, sigma2,
                  mean_out, var_out):
    """Kriging prediction of each test site from its listed training sites.

    Returns 0 on success or (test index + 1) on factorization failure.
    """
    nt = test_coords.shape[0]
    m = nbr.shape[1]
    c_nu = 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))
    M = np.empty((m, m))
    k0 = np.empty(m)
    y = np.empty(m)
    w = np.empty(m)
    for i in range(nt):
        k = 0
        for a in range(m):
            if nbr[i, a] >= 0:
                k += 1
        if k == 0:
            mean_out[i] = mu_m
            var_out[i] = sigma2
            continue
        xi0 = test_coords[i, 0]
        xi1 = test_coords[i, 1]
        for a in range(k):
            ja = nbr[i, a]
            dx = train_coords[ja, 0] - xi0
            dy = train_coords[ja, 1] - xi1
            k0[a] = r * matern_scalar(math.sqrt(dx * dx + dy * dy), phi, nu, c_nu)
            M[a, a] = 1.0
            for b in range(a):
                jb = nbr[i, b]
                ex = train_coords[ja, 0] - train_coords[jb, 0]
                ey = train_coords[ja, 1] - train_coords[jb, 1]
                cv = r * matern_scalar(math.sqrt(ex * ex + ey * ey), phi, nu, c_nu)
                M[a, b] = cv
                M[b, a] = cv
        if _chol_in_place(M, k) != 0:
            return i + 1
        _forward_solve(M, k0, k, y)
        qf = 0.0
        for a in range(k):
            qf += y[a] * y[a]
        ev = 1.0 - qf
        if ev <= 0.0:
            return i + 1
        _back_solve_t(M, y, k, w)
        cm = mu_m
        for a in range(k):
            cm += w[a] * (z[nbr[i, a]] - mu_m)
        mean_out[i] = cm
        var_out[i] = sigma2 * ev
    return 0


# ---------------------------------------------------------------------------
# Piecewise Chebyshev tables of the Matern correlation in (log x, nu)
# ---------------------------------------------------------------------------


@njit(cache=True)
def tab_node_values(t_nodes, nu_nodes, out):
    """out[i, j] = Matern correlation at x = exp(t_nodes[i]), order nu_nodes[j]."""
    for j in range(nu_nodes.shape[0]):
        nu = nu_nodes[j]
        c_nu = 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))
        for i in range(t_nodes.shape[0]):
            x = math.exp(t_nodes[i])
            out[i, j] = c_nu * x ** nu * kv_scalar(nu, x)


@njit(cache=True)
def tab_collapse_nu(coeffs, nu, nu_lo, h_nu, out):
    """Collapse the nu direction of a (n_pn, n_pt, nt, nn) coefficient tensor
    into per-t-panel 1-D coefficients for a fixed nu."""
    n_pn, n_pt, nt, nn = coeffs.shape
    pn = int((nu - nu_lo) / h_nu)
    if pn < 0:
        pn = 0
    if pn >= n_pn:
        pn = n_pn - 1
    a = nu_lo + pn * h_nu
    s = 2.0 * (nu - a) / h_nu - 1.0
    for p in range(n_pt):
        for i in range(nt):
            b1 = 0.0
            b2 = 0.0
            for j in range(nn - 1, 0, -1):
                b0 = 2.0 * s * b1 - b2 + coeffs[pn, p, i, j]
                b2 = b1
                b1 = b0
            out[p, i] = s * b1 - b2 + coeffs[pn, p, i, 0]


@njit(cache=True, fastmath=True)
def _tab_eval(ct, t_lo, t_hi, inv_h, n_pt, nt, t):
    if t >= t_hi:
        return 0.0
    if t < t_lo:
        t = t_lo
    p = int((t - t_lo) * inv_h)
    if p >= n_pt:
        p = n_pt - 1
    a = t_lo + p / inv_h
    u = 2.0 * (t - a) * inv_h - 1.0
    b1 = 0.0
    b2 = 0.0
    for i in range(nt - 1, 0, -1):
        b0 = 2.0 * u * b1 - b2 + ct[p, i]
        b2 = b1
        b1 = b0
    return u * b1 - b2 + ct[p, 0]


@njit(cache=True, fastmath=True)
def tab_corr_stacks(logd_site, logd_pair, nlen, ct, t_lo, t_hi, inv_h,
                    log_phi, ks_out, kp_out):
    """Fill per-site correlation stacks K(d/phi) from a collapsed table."""
    n, m = logd_site.shape
    n_pt, nt = ct.shape
    for i in range(n):
        k = nlen[i]
        for a in range(k):
            ks_out[i, a] = _tab_eval(ct, t_lo, t_hi, inv_h, n_pt, nt,
                                     logd_site[i, a] - log_phi)
            for b in range(a):
                kp_out[i, a, b] = _tab_eval(ct, t_lo, t_hi, inv_h, n_pt, nt,
                                            logd_pair[i, a, b] - log_phi)


@njit(cache=True, fastmath=True)
def solve_from_stacks(ks, kp, nlen, r, w_out, lv_out):
    """Kriging weights/log-variance from correlation stacks at proportion r."""
    n, m = ks.shape
    M = np.empty((m, m))
    k0 = np.empty(m)
    y = np.empty(m)
    for i in range(n):
        k = nlen[i]
        lv_out[i] = 0.0
        for a in range(m):
            w_out[i, a] = 0.0
        if k == 0:
            continue
        for a in range(k):
            k0[a] = r * ks[i, a]
            M[a, a] = 1.0
            for b in range(a):
                M[a, b] = r * kp[i, a, b]
        # lower Cholesky using only the lower triangle of M
        fail = 0
        for a in range(k):
            s = M[a, a]
            for t in range(a):
                s -= M[a, t] * M[a, t]
            if s <= 0.0:
                fail = a + 1
                break
            la = math.sqrt(s)
            M[a, a] = la
            inv = 1.0 / la
            for b in range(a + 1, k):
                s2 = M[b, a]
                for t in range(a):
                    s2 -= M[b, t] * M[a, t]
                M[b, a] = s2 * inv
        if fail != 0:
            return i + 1
        _forward_solve(M, k0, k, y)
        qf = 0.0
        for a in range(k):
            qf += y[a] * y[a]
        ev = 1.0 - qf
        if ev <= 0.0:
            return i + 1
        _back_solve_t(M, y, k, k0)
        for a in range(k):
            w_out[i, a] = k0[a]
        lv_out[i] = math.log(ev)
    return 0
