"""Hot numeric kernels, each in a numba flavour and a pure-numpy flavour.

Both flavours are importable by name (``*_numba`` / ``*_numpy``); the
unsuffixed names dispatch according to :data:`switchcost._accel.USE_NUMBA`.

Distribution families are passed to kernels as an integer code plus a flat
float64 parameter vector (see ``ValuationDistribution.kernel_params``).
Extended semantics apply throughout: F(x)=0 below 0 and 1 above 1, and the
density and its derivative vanish outside [0, 1).
"""
import math

import numpy as np
from scipy import special

from ._accel import USE_NUMBA, njit

UNIFORM = 0
TRIANGULAR = 1
TRAPEZOIDAL = 2
TRUNC_EXP = 3
TRUNC_NORMAL = 4
TRUNC_PARETO = 5
PIECEWISE_LINEAR = 6

_SQRT2PI = math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


# ----------------------------------------------------------------------------
# numpy family math (x inside [0, 1])
# ----------------------------------------------------------------------------

def _pl_unpack(p):
    m = int(p[0])
    y = p[1:m + 2]
    cum = p[m + 2:2 * m + 3]
    return m, y, cum


def np_pdf(code, p, x):
    x = np.asarray(x, dtype=float)
    if code == UNIFORM:
        return np.ones_like(x)
    if code == TRIANGULAR:
        return 2.0 * x
    if code == TRAPEZOIDAL:
        return np.minimum(p[0] * x, p[1])
    if code == TRUNC_EXP:
        return p[0] * np.exp(-p[0] * x) / p[1]
    if code == TRUNC_NORMAL:
        z = (x - p[0]) / p[1]
        return np.exp(-0.5 * z * z) / (_SQRT2PI * p[1] * p[4])
    if code == TRUNC_PARETO:
        return p[0] * (x - p[1]) ** (-p[0] - 1.0) / p[3]
    m, y, _ = _pl_unpack(p)
    return np.interp(x, np.linspace(0.0, 1.0, m + 1), y)


def np_cdf(code, p, x):
    x = np.asarray(x, dtype=float)
    if code == UNIFORM:
        return x.copy()
    if code == TRIANGULAR:
        return x * x
    if code == TRAPEZOIDAL:
        k, h, x0 = p[0], p[1], p[2]
        return np.where(x < x0, 0.5 * k * x * x, 0.5 * h * x0 + h * (x - x0))
    if code == TRUNC_EXP:
        return -np.expm1(-p[0] * x) / p[1]
    if code == TRUNC_NORMAL:
        m, sd, a, Z = p[0], p[1], p[2], p[4]
        z = (x - m) / sd
        if a > 0.0:
            return (special.ndtr(-a) - special.ndtr(-z)) / Z
        return (special.ndtr(z) - special.ndtr(a)) / Z
    if code == TRUNC_PARETO:
        b, loc, t0, Z = p[0], p[1], p[2], p[3]
        return (t0 - (x - loc) ** (-b)) / Z
    m, y, cum = _pl_unpack(p)
    k = np.clip(np.floor(x * m).astype(np.int64), 0, m - 1)
    t = x - k / m
    slope = (y[k + 1] - y[k]) * m
    return cum[k] + y[k] * t + 0.5 * slope * t * t


def np_dpdf(code, p, x):
    """Derivative of the density; left derivative at kinks."""
    x = np.asarray(x, dtype=float)
    if code == UNIFORM:
        return np.zeros_like(x)
    if code == TRIANGULAR:
        return np.full_like(x, 2.0)
    if code == TRAPEZOIDAL:
        return np.where(x <= p[2], p[0], 0.0)
    if code == TRUNC_EXP:
        return -p[0] * np_pdf(code, p, x)
    if code == TRUNC_NORMAL:
        return -(x - p[0]) / (p[1] * p[1]) * np_pdf(code, p, x)
    if code == TRUNC_PARETO:
        return -(p[0] + 1.0) * np_pdf(code, p, x) / (x - p[1])
    m, y, _ = _pl_unpack(p)
    k = np.clip(np.ceil(x * m).astype(np.int64) - 1, 0, m - 1)
    return (y[k + 1] - y[k]) * m


def np_d2pdf(code, p, x):
    x = np.asarray(x, dtype=float)
    if code == TRUNC_EXP:
        return p[0] * p[0] * np_pdf(code, p, x)
    if code == TRUNC_NORMAL:
        s2 = p[1] * p[1]
        return ((x - p[0]) ** 2 / (s2 * s2) - 1.0 / s2) * np_pdf(code, p, x)
    if code == TRUNC_PARETO:
        b = p[0]
        return (b + 1.0) * (b + 2.0) * np_pdf(code, p, x) / (x - p[1]) ** 2
    return np.zeros_like(x)


def np_ppf(code, p, u):
    u = np.asarray(u, dtype=float)
    if code == UNIFORM:
        return u.copy()
    if code == TRIANGULAR:
        return np.sqrt(u)
    if code == TRAPEZOIDAL:
        k, h, x0 = p[0], p[1], p[2]
        u0 = 0.5 * h * x0
        lo = np.sqrt(2.0 * np.minimum(u, u0) / k)
        return np.where(u < u0, lo, x0 + (u - u0) / h)
    if code == TRUNC_EXP:
        return -np.log1p(-u * p[1]) / p[0]
    if code == TRUNC_NORMAL:
        m, sd, a, Z = p[0], p[1], p[2], p[4]
        if a > 0.0:
            z = -special.ndtri(np.clip(special.ndtr(-a) - u * Z, 1e-300, 1.0))
        else:
            z = special.ndtri(np.clip(special.ndtr(a) + u * Z, 1e-300, 1.0))
        x = np.clip(m + sd * z, 0.0, 1.0)
        # ndtri loses relative accuracy deep in a tail; polish on the cdf
        for _ in range(3):
            dens = np_pdf(code, p, x)
            step = np.where(dens > 0, (np_cdf(code, p, x) - u) / np.where(dens > 0, dens, 1.0), 0.0)
            x = np.clip(x - step, 0.0, 1.0)
        return x
    if code == TRUNC_PARETO:
        b, loc, t0, Z = p[0], p[1], p[2], p[3]
        return loc + (t0 - u * Z) ** (-1.0 / b)
    m, y, cum = _pl_unpack(p)
    k = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, m - 1)
    r = u - cum[k]
    yk = y[k]
    a = (y[k + 1] - yk) * m
    disc = np.sqrt(np.maximum(yk * yk + 2.0 * a * r, 0.0))
    denom = yk + disc
    t = np.where(denom > 0, 2.0 * r / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(k / m + t, 0.0, 1.0)


def np_cdf_ext(code, p, x):
    x = np.asarray(x, dtype=float)
    val = np.clip(np_cdf(code, p, np.clip(x, 0.0, 1.0)), 0.0, 1.0)
    return np.where(x <= 0.0, 0.0, np.where(x >= 1.0, 1.0, val))


def np_pdf_ext(code, p, x):
    x = np.asarray(x, dtype=float)
    inside = (x >= 0.0) & (x < 1.0)
    return np.where(inside, np_pdf(code, p, np.clip(x, 0.0, 1.0)), 0.0)


def np_dpdf_ext(code, p, x):
    x = np.asarray(x, dtype=float)
    inside = (x >= 0.0) & (x < 1.0)
    return np.where(inside, np_dpdf(code, p, np.clip(x, 0.0, 1.0)), 0.0)


# ----------------------------------------------------------------------------
# numba scalar family math (extended semantics)
# ----------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _ndtr(z):
    return 0.5 * math.erfc(-z / _SQRT2)


@njit(cache=True)
def _pdf_s(code, p, x):
    if x < 0.0 or x >= 1.0:
        return 0.0
    if code == UNIFORM:
        return 1.0
    if code == TRIANGULAR:
        return 2.0 * x
    if code == TRAPEZOIDAL:
        return min(p[0] * x, p[1])
    if code == TRUNC_EXP:
        return p[0] * math.exp(-p[0] * x) / p[1]
    if code == TRUNC_NORMAL:
        z = (x - p[0]) / p[1]
        return math.exp(-0.5 * z * z) / (_SQRT2PI * p[1] * p[4])
    if code == TRUNC_PARETO:
        return p[0] * (x - p[1]) ** (-p[0] - 1.0) / p[3]
    m = int(p[0])
    k = int(math.floor(x * m))
    if k > m - 1:
        k = m - 1
    t = x - k / m
    return p[1 + k] + (p[2 + k] - p[1 + k]) * m * t


@njit(cache=True)
def _cdf_s(code, p, x):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    if code == UNIFORM:
        return x
    if code == TRIANGULAR:
        return x * x
    if code == TRAPEZOIDAL:
        if x < p[2]:
            return 0.5 * p[0] * x * x
        return 0.5 * p[1] * p[2] + p[1] * (x - p[2])
    if code == TRUNC_EXP:
        return -math.expm1(-p[0] * x) / p[1]
    if code == TRUNC_NORMAL:
        z = (x - p[0]) / p[1]
        if p[2] > 0.0:
            return (_ndtr(-p[2]) - _ndtr(-z)) / p[4]
        return (_ndtr(z) - _ndtr(p[2])) / p[4]
    if code == TRUNC_PARETO:
        return (p[2] - (x - p[1]) ** (-p[0])) / p[3]
    m = int(p[0])
    k = int(math.floor(x * m))
    if k > m - 1:
        k = m - 1
    t = x - k / m
    yk = p[1 + k]
    slope = (p[2 + k] - yk) * m
    return p[m + 2 + k] + yk * t + 0.5 * slope * t * t


@njit(cache=True)
def _dpdf_s(code, p, x):
    if x < 0.0 or x >= 1.0:
        return 0.0
    if code == UNIFORM:
        return 0.0
    if code == TRIANGULAR:
        return 2.0
    if code == TRAPEZOIDAL:
        return p[0] if x <= p[2] else 0.0
    if code == TRUNC_EXP or code == TRUNC_NORMAL or code == TRUNC_PARETO:
        f = _pdf_s(code, p, x)
        if code == TRUNC_EXP:
            return -p[0] * f
        if code == TRUNC_NORMAL:
            return -(x - p[0]) / (p[1] * p[1]) * f
        return -(p[0] + 1.0) * f / (x - p[1])
    m = int(p[0])
    k = int(math.ceil(x * m)) - 1
    if k < 0:
        k = 0
    if k > m - 1:
        k = m - 1
    return (p[2 + k] - p[1 + k]) * m


# ----------------------------------------------------------------------------
# block integrand: f_i(x) * prod_c F_c(x + alpha_c) and its parameter pieces
# ----------------------------------------------------------------------------

def block_ncomp(m, order):
    if order == 0:
        return 1
    if order == 1:
        return 1 + m
    return 1 + 2 * m + m * m


@njit(cache=True)
def block_integrand_numba(x, alpha, rcodes, rparams, ocode, oparams, order):
    M, Q = x.shape
    m = alpha.shape[1]
    nc = 1 if order == 0 else (1 + m if order == 1 else 1 + 2 * m + m * m)
    out = np.zeros((M, Q, nc))
    F = np.empty(m)
    f = np.empty(m)
    d = np.empty(m)
    pre = np.empty(m + 1)
    suf = np.empty(m + 1)
    for r in range(M):
        for q in range(Q):
            xv = x[r, q]
            fi = _pdf_s(ocode, oparams, xv)
            if fi == 0.0:
                continue
            for c in range(m):
                y = xv + alpha[r, c]
                F[c] = _cdf_s(rcodes[c], rparams[c], y)
                if order > 0:
                    f[c] = _pdf_s(rcodes[c], rparams[c], y)
                if order > 1:
                    d[c] = _dpdf_s(rcodes[c], rparams[c], y)
            pre[0] = 1.0
            for c in range(m):
                pre[c + 1] = pre[c] * F[c]
            out[r, q, 0] = fi * pre[m]
            if order == 0:
                continue
            suf[m] = 1.0
            for c in range(m - 1, -1, -1):
                suf[c] = suf[c + 1] * F[c]
            for c in range(m):
                excl = pre[c] * suf[c + 1]
                out[r, q, 1 + c] = fi * f[c] * excl
                if order > 1:
                    out[r, q, 1 + m + c] = fi * d[c] * excl
            if order > 1:
                for c in range(m):
                    for l in range(c + 1, m):
                        prod = 1.0
                        for t in range(m):
                            if t != c and t != l:
                                prod *= F[t]
                        v = fi * f[c] * f[l] * prod
                        out[r, q, 1 + 2 * m + c * m + l] = v
                        out[r, q, 1 + 2 * m + l * m + c] = v
    return out


def block_integrand_numpy(x, alpha, rcodes, rparams, ocode, oparams, order):
    M, Q = x.shape
    m = alpha.shape[1]
    out = np.zeros((M, Q, block_ncomp(m, order)))
    fi = np_pdf_ext(ocode, oparams, x)
    y = x[:, :, None] + alpha[:, None, :]
    F = np.empty((M, Q, m))
    for c in range(m):
        F[:, :, c] = np_cdf_ext(rcodes[c], rparams[c], y[:, :, c])
    out[:, :, 0] = fi * np.prod(F, axis=2)
    if order == 0:
        return out
    ones = np.ones((M, Q, 1))
    pre = np.cumprod(np.concatenate([ones, F], axis=2), axis=2)[:, :, :m]
    suf = np.cumprod(np.concatenate([ones, F[:, :, ::-1]], axis=2), axis=2)[:, :, :m][:, :, ::-1]
    excl = pre * suf
    for c in range(m):
        fc = np_pdf_ext(rcodes[c], rparams[c], y[:, :, c])
        out[:, :, 1 + c] = fi * fc * excl[:, :, c]
        if order > 1:
            dc = np_dpdf_ext(rcodes[c], rparams[c], y[:, :, c])
            out[:, :, 1 + m + c] = fi * dc * excl[:, :, c]
    if order > 1:
        f = np.stack([np_pdf_ext(rcodes[c], rparams[c], y[:, :, c]) for c in range(m)], axis=2)
        for c in range(m):
            for l in range(c + 1, m):
                keep = [t for t in range(m) if t != c and t != l]
                prod = np.prod(F[:, :, keep], axis=2) if keep else 1.0
                v = fi * f[:, :, c] * f[:, :, l] * prod
                out[:, :, 1 + 2 * m + c * m + l] = v
                out[:, :, 1 + 2 * m + l * m + c] = v
    return out


# ----------------------------------------------------------------------------
# consumer choice counting for the Monte Carlo oracle
# ----------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def choice_counts_numba(V, init, p_own, p_switch, s, exit_allowed):
    """counts[k, 0] = exits of consumers starting at k; counts[k, j+1] = buys at j."""
    N, n = V.shape
    counts = np.zeros((n, n + 1), dtype=np.int64)
    for t in range(N):
        k = init[t]
        best = k
        best_u = V[t, k] - p_own[k]
        for j in range(n):
            if j == k:
                continue
            u = V[t, j] - p_switch[j] - s
            if u > best_u:
                best_u = u
                best = j
        if exit_allowed and best_u < 0.0:
            counts[k, 0] += 1
        else:
            counts[k, best + 1] += 1
    return counts


def choice_counts_numpy(V, init, p_own, p_switch, s, exit_allowed):
    N, n = V.shape
    counts = np.zeros((n, n + 1), dtype=np.int64)
    for k in range(n):
        rows = V[init == k]
        if rows.shape[0] == 0:
            continue
        order = [k] + [j for j in range(n) if j != k]
        util = rows[:, order] - np.asarray(p_switch)[order] - s
        util[:, 0] = rows[:, k] - p_own[k]
        pick = np.argmax(util, axis=1)
        best_u = util[np.arange(rows.shape[0]), pick]
        chosen = np.asarray(order)[pick]
        if exit_allowed:
            leave = best_u < 0.0
            counts[k, 0] = int(leave.sum())
            chosen = chosen[~leave]
        counts[k, 1:] += np.bincount(chosen, minlength=n)
    return counts


# ----------------------------------------------------------------------------
# cutoff offsets over rival valuation samples (QMC demand route)
# ----------------------------------------------------------------------------

@njit(cache=True)
def cutoff_offsets_numba(Y, Z, s, exit_allowed):
    """Offsets w with cutoff = own price + w, per sample.

    Y[:, c] = v_c - p_switch_c and Z[:, c] = v_c - p_own_c for rival column c.
    Column 0 of the result is the stayer offset, column 1 + c the offset for
    consumers initially at rival c.
    """
    N, m = Y.shape
    W = np.empty((N, m + 1))
    for t in range(N):
        top1 = -np.inf
        top2 = -np.inf
        arg = -1
        for c in range(m):
            y = Y[t, c]
            if y > top1:
                top2 = top1
                top1 = y
                arg = c
            elif y > top2:
                top2 = y
        w0 = top1 - s
        if exit_allowed and w0 < 0.0:
            w0 = 0.0
        W[t, 0] = w0
        for c in range(m):
            rest = top2 if c == arg else top1
            w = Z[t, c] + s
            if exit_allowed and s > w:
                w = s
            if rest > w:
                w = rest
            W[t, 1 + c] = w
    return W


def cutoff_offsets_numpy(Y, Z, s, exit_allowed):
    N, m = Y.shape
    W = np.empty((N, m + 1))
    arg = np.argmax(Y, axis=1)
    top1 = Y[np.arange(N), arg]
    if m > 1:
        top2 = np.partition(Y, m - 2, axis=1)[:, m - 2]
    else:
        top2 = np.full(N, -np.inf)
    w0 = top1 - s
    W[:, 0] = np.maximum(w0, 0.0) if exit_allowed else w0
    for c in range(m):
        rest = np.where(arg == c, top2, top1)
        w = Z[:, c] + s
        if exit_allowed:
            w = np.maximum(w, s)
        W[:, 1 + c] = np.maximum(w, rest)
    return W


if USE_NUMBA:
    block_integrand = block_integrand_numba
    choice_counts = choice_counts_numba
    cutoff_offsets = cutoff_offsets_numba
else:
    block_integrand = block_integrand_numpy
    choice_counts = choice_counts_numpy
    cutoff_offsets = cutoff_offsets_numpy
