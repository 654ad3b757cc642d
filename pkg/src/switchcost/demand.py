"""Expected demand, profit and profit derivatives by quadrature.

Because valuations are independent across firms, each piece of firm i's
demand reduces to a one-dimensional integral over its own valuation x:

    B = int_L^1 f_i(x) prod_c F_c(x + alpha_c) dx

with one factor per rival c. Consumers who start at i and stay form one
such block; consumers who start at rival k and come over form another.
L and every alpha_c are affine in the parameter vector

    theta = (own prices p_0..p_{n-1}, switcher prices q_0..q_{n-1}, s),

so derivatives of any order follow from differentiating under the integral
(Leibniz terms at the lower limit, plus point terms where a rival density
jumps at the edges of [0, 1]). In uniform pricing p = q.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from . import kernels as K
from .market import MarketConfig, as_prices
from .oracle import DemandBreakdown, FirmDemand
from .quadrature import DEFAULT_TOL, QuadratureError, integrate

QMC_POINTS_LOG2 = 17
QMC_SEED = 20240917


# ----------------------------------------------------------------------------
# parameter-space bookkeeping
# ----------------------------------------------------------------------------

def theta_of(config: MarketConfig, P) -> np.ndarray:
    po, ps = as_prices(config, P)
    return np.concatenate([po, ps, [config.s]])


def price_direction(n: int, i: int, which: str = "both") -> np.ndarray:
    """Unit direction in theta for a change of firm i's price."""
    u = np.zeros(2 * n + 1)
    if which in ("both", "own"):
        u[i] = 1.0
    if which in ("both", "switch"):
        u[n + i] = 1.0
    if which not in ("both", "own", "switch"):
        raise ValueError(f"unknown price direction {which!r}")
    return u


def s_direction(n: int) -> np.ndarray:
    u = np.zeros(2 * n + 1)
    u[2 * n] = 1.0
    return u


class FirmModel:
    """Demand blocks of one firm as affine maps of theta."""

    def __init__(self, config: MarketConfig, i: int, tol: float = DEFAULT_TOL):
        n = config.n
        self.n, self.i, self.tol = n, i, tol
        self.D = 2 * n + 1
        self.cost = config.c[i]
        self.rivals = [j for j in range(n) if j != i]
        m = self.m = n - 1
        own = config.dists[i]
        self.ocode, self.oparams = own.code, np.ascontiguousarray(own.kernel_params)
        self.okinks = own.kinks
        rd = [config.dists[j] for j in self.rivals]
        width = max(d.kernel_params.size for d in rd)
        self.rcodes = np.array([d.code for d in rd], dtype=np.int64)
        self.rparams = np.zeros((m, width))
        for c, d in enumerate(rd):
            self.rparams[c, :d.kernel_params.size] = d.kernel_params
        self.rdists = rd
        self.edge = np.array([d.edge_densities for d in rd])  # (m, 2)
        kink_cols = [(c, k) for c, d in enumerate(rd) for k in d.kinks]
        self.kink_col = np.array([c for c, _ in kink_cols], dtype=np.int64)
        self.kink_val = np.array([k for _, k in kink_cols], dtype=float)

        PO, PS, S = (lambda j: j), (lambda j: n + j), 2 * n
        nb = n
        LG = np.zeros((nb, self.D))
        AG = np.zeros((nb, m, self.D))
        W = np.zeros(nb)
        PIDX = np.zeros(nb, dtype=np.int64)
        # block 0: consumers who start at i and stay
        W[0], PIDX[0] = config.mu[i], PO(i)
        if config.exit_allowed:
            LG[0, PO(i)] = 1.0
        for c, j in enumerate(self.rivals):
            AG[0, c, S] += 1.0
            AG[0, c, PS(j)] += 1.0
            AG[0, c, PO(i)] -= 1.0
        # block 1 + ck: consumers who start at rival k and switch to i
        for ck, k in enumerate(self.rivals):
            b = 1 + ck
            W[b], PIDX[b] = config.mu[k], PS(i)
            if config.exit_allowed:
                LG[b, PS(i)] = 1.0
                LG[b, S] = 1.0
            for c, j in enumerate(self.rivals):
                if c == ck:
                    AG[b, c, PO(k)] += 1.0
                    AG[b, c, S] -= 1.0
                else:
                    AG[b, c, PS(j)] += 1.0
                AG[b, c, PS(i)] -= 1.0
        self.LG, self.AG, self.W, self.PIDX = LG, AG, W, PIDX
        self.nb = nb

    # -- integration ---------------------------------------------------------

    def _integrals(self, L, A, order):
        """Block integrals, shape (M, ncomp), for M rows of (L, alpha)."""
        M, m = A.shape
        ncomp = K.block_ncomp(m, order)
        lo = np.maximum(np.maximum(L, 0.0), np.max(-A, axis=1))
        hi = np.ones(M)
        empty = lo >= hi
        lo = np.where(empty, 1.0, lo)
        parts = [-A, 1.0 - A]
        if self.kink_val.size:
            parts.append(self.kink_val[None, :] - A[:, self.kink_col])
        if self.okinks.size:
            parts.append(np.broadcast_to(self.okinks, (M, self.okinks.size)))
        breaks = np.concatenate(parts, axis=1)
        A = np.ascontiguousarray(A)
        rcodes, rparams, ocode, oparams = self.rcodes, self.rparams, self.ocode, self.oparams

        def fun(x, owner):
            return K.block_integrand(np.ascontiguousarray(x), np.ascontiguousarray(A[owner]),
                                     rcodes, rparams, ocode, oparams, order)

        vals, _ = integrate(fun, lo, hi, breaks, ncomp, tol=self.tol)
        return vals

    def geometry(self, thetas):
        thetas = np.atleast_2d(thetas)
        L = thetas @ self.LG.T                                   # (G, nb)
        A = np.einsum("gd,bmd->gbm", thetas, self.AG)            # (G, nb, m)
        return L, A

    def blocks(self, thetas, order=0, subset=None):
        """Raw block integrals, shape (G, nb', ncomp)."""
        thetas = np.atleast_2d(thetas)
        L, A = self.geometry(thetas)
        if subset is not None:
            L, A = L[:, subset], A[:, subset]
        G, nb = L.shape
        vals = self._integrals(L.reshape(-1), A.reshape(G * nb, self.m), order)
        return vals.reshape(G, nb, -1), L, A

    # -- profit and derivatives ----------------------------------------------

    def profit_curve(self, thetas, subset=None):
        """Profit at each theta row, restricted to a subset of blocks."""
        thetas = np.atleast_2d(thetas)
        idx = np.arange(self.nb) if subset is None else np.asarray(subset)
        I, _, _ = self.blocks(thetas, 0, idx)
        markup = thetas[:, self.PIDX[idx]] - self.cost
        return np.sum(self.W[idx] * markup * I[:, :, 0], axis=1)

    def _boundary(self, L, A, order):
        """Integrand pieces at the lower limit and at rival support edges."""
        m = self.m
        y = L[..., None] + A
        F = np.empty(y.shape)
        f = np.empty(y.shape)
        for c in range(m):
            F[..., c] = K.np_cdf_ext(self.rcodes[c], self.rparams[c], y[..., c])
            f[..., c] = K.np_pdf_ext(self.rcodes[c], self.rparams[c], y[..., c])
        fL = K.np_pdf_ext(self.ocode, self.oparams, L)
        GL = np.prod(F, axis=-1)
        excl = np.empty(y.shape)
        for c in range(m):
            excl[..., c] = np.prod(np.delete(F, c, axis=-1), axis=-1)
        out = {"fL": fL, "GL": GL, "g1L": f * excl}
        if order < 2:
            return out
        out["dfL"] = K.np_dpdf_ext(self.ocode, self.oparams, L)
        E = np.zeros(y.shape)
        for y0, col in ((0.0, 0), (1.0, 1)):
            jump = self.edge[:, col] * (1.0 if y0 == 0.0 else -1.0)  # (m,)
            xs = y0 - A                                                 # (..., m)
            inside = (xs > L[..., None]) & (xs < 1.0) & (xs > 0.0)
            if not np.any(inside & (jump != 0.0)):
                continue
            fx = K.np_pdf_ext(self.ocode, self.oparams, xs)
            for c in range(m):
                prod = np.ones(L.shape)
                for l in range(m):
                    if l != c:
                        prod = prod * K.np_cdf_ext(self.rcodes[l], self.rparams[l], xs[..., c] + A[..., l])
                E[..., c] += np.where(inside[..., c], jump[c] * fx[..., c] * prod, 0.0)
        out["E"] = E
        return out

    def evaluate(self, theta, dirs=(), pairs=()):
        """Profit, directional first derivatives and second derivatives at one theta.

        ``dirs`` is a sequence of theta-directions u (gives d profit / du),
        ``pairs`` a sequence of (u, w) (gives d2 profit / du dw). Second-order
        results also carry per-block contributions and the support-edge part.
        """
        theta = np.asarray(theta, dtype=float)
        order = 2 if len(pairs) else (1 if len(dirs) else 0)
        I, L, A = self.blocks(theta[None, :], order)
        I, L, A = I[0], L[0], A[0]          # (nb, ncomp), (nb,), (nb, m)
        m = self.m
        B = I[:, 0]
        markup = theta[self.PIDX] - self.cost
        res = {"blocks": B, "profit": float(np.sum(self.W * markup * B))}
        if order == 0:
            return res
        bd = self._boundary(L, A, order)
        I1 = I[:, 1:1 + m]

        def first(u):
            Lu = self.LG @ u
            Au = self.AG @ u
            return -bd["fL"] * bd["GL"] * Lu + np.sum(Au * I1, axis=1), Lu, Au

        cache = {}

        def first_cached(u):
            key = u.tobytes()
            if key not in cache:
                cache[key] = first(u)
            return cache[key]

        grads = []
        for u in dirs:
            u = np.asarray(u, dtype=float)
            Bu, _, _ = first_cached(u)
            grads.append(float(np.sum(self.W * (u[self.PIDX] * B + markup * Bu))))
        res["grad"] = np.array(grads)
        if order < 2:
            return res
        I2d = I[:, 1 + m:1 + 2 * m]
        I2o = I[:, 1 + 2 * m:].reshape(self.nb, m, m)
        hess, hblocks, hedge = [], [], []
        for u, w in pairs:
            u = np.asarray(u, dtype=float)
            w = np.asarray(w, dtype=float)
            Bu, Lu, Au = first_cached(u)
            Bw, Lw, Aw = first_cached(w)
            lower = (-Lu * Lw * bd["dfL"] * bd["GL"]
                     - bd["fL"] * np.sum(bd["g1L"] * (Lu * Lw)[:, None] + bd["g1L"] * (Lu[:, None] * Aw + Lw[:, None] * Au), axis=1))
            diag = np.sum(Au * Aw * I2d, axis=1)
            edge = np.sum(Au * Aw * bd["E"], axis=1)
            off = np.einsum("bc,bl,bcl->b", Au, Aw, I2o)
            Buw = lower + diag + edge + off
            per_block = self.W * (u[self.PIDX] * Bw + w[self.PIDX] * Bu + markup * Buw)
            hess.append(float(per_block.sum()))
            hblocks.append(per_block)
            hedge.append(float(np.sum(self.W * markup * edge)))
        res["hess"] = np.array(hess)
        res["hess_blocks"] = np.array(hblocks)
        res["hess_edge"] = np.array(hedge)
        return res


@lru_cache(maxsize=512)
def firm_model(config: MarketConfig, i: int) -> FirmModel:
    return FirmModel(config, i)


# ----------------------------------------------------------------------------
# demand
# ----------------------------------------------------------------------------

def switch_cutoff(k, i, v, P, s, exit_allowed=True, p_switch=None):
    """Valuation for firm i above which a consumer starting at k switches to i.

    ``v`` is the full valuation vector (entry i is ignored). ``P`` gives the
    price paid at one's initial firm, ``p_switch`` the price paid when
    switching in (defaults to ``P``). The result is clamped at 1.
    """
    v = np.asarray(v, dtype=float)
    po = np.asarray(P, dtype=float)
    ps = po if p_switch is None else np.asarray(p_switch, dtype=float)
    w = v[k] - po[k] + s
    if exit_allowed:
        w = max(w, s)
    for j in range(v.size):
        if j != i and j != k:
            w = max(w, v[j] - ps[j])
    return min(ps[i] + w, 1.0)


def exit_mass(config: MarketConfig, P) -> float:
    """Mass of consumers who buy nowhere (closed form)."""
    if not config.exit_allowed:
        return 0.0
    po, ps = as_prices(config, P)
    total = 0.0
    for k in range(config.n):
        d = config.dists[k]
        prob = float(K.np_cdf_ext(d.code, d.kernel_params, po[k]))
        for j in range(config.n):
            if j != k:
                dj = config.dists[j]
                prob *= float(K.np_cdf_ext(dj.code, dj.kernel_params, ps[j] + config.s))
        total += config.mu[k] * prob
    return total


@lru_cache(maxsize=8)
def _sobol_points(m, log2n=QMC_POINTS_LOG2, seed=QMC_SEED):
    return qmc.Sobol(d=m, scramble=True, seed=seed).random_base2(log2n)


def _qmc_firm_demand(config: MarketConfig, po, ps, i) -> FirmDemand:
    """Sample rival valuations on a scrambled Sobol set and average the
    closed-form own-valuation tail at each sampled cutoff."""
    rivals = [j for j in range(config.n) if j != i]
    U = _sobol_points(len(rivals))
    V = np.empty(U.shape)
    for c, j in enumerate(rivals):
        d = config.dists[j]
        V[:, c] = K.np_ppf(d.code, d.kernel_params, U[:, c])
    Y = np.ascontiguousarray(V - ps[rivals])
    Z = np.ascontiguousarray(V - po[rivals])
    Wo = K.cutoff_offsets(Y, Z, config.s, bool(config.exit_allowed))
    di = config.dists[i]
    tail = lambda x: 1.0 - K.np_cdf_ext(di.code, di.kernel_params, x)
    stay = config.mu[i] * float(np.mean(tail(po[i] + Wo[:, 0])))
    switch = sum(config.mu[j] * float(np.mean(tail(ps[i] + Wo[:, 1 + c]))) for c, j in enumerate(rivals))
    return FirmDemand(stay, switch)


def demand(config: MarketConfig, P, i: int, method: str = "quad") -> FirmDemand:
    """Firm i's initial (stayer) mass and switch-in mass.

    ``method="quad"`` integrates the exact one-dimensional blocks;
    ``method="qmc"`` averages over a fixed scrambled Sobol set of rival
    valuations (2^17 points).
    """
    if method == "qmc":
        po, ps = as_prices(config, P)
        return _qmc_firm_demand(config, po, ps, i)
    if method != "quad":
        raise ValueError(f"unknown demand method {method!r}")
    fm = firm_model(config, i)
    I, _, _ = fm.blocks(theta_of(config, P)[None, :], 0)
    B = I[0, :, 0]
    return FirmDemand(float(fm.W[0] * B[0]), float(np.sum(fm.W[1:] * B[1:])))


def demand_breakdown(config: MarketConfig, P, method: str = "quad") -> DemandBreakdown:
    parts = [demand(config, P, i, method) for i in range(config.n)]
    return DemandBreakdown(
        initial_mass=np.array([p.initial_mass for p in parts]),
        switch_in_mass=np.array([p.switch_in_mass for p in parts]),
        exit_mass=exit_mass(config, P),
    )


def demand_discriminatory(config: MarketConfig, P, i: int):
    """(own-segment demand, switch-in-segment demand) under per-segment prices."""
    d = demand(config, P, i)
    return d.initial_mass, d.switch_in_mass


# ----------------------------------------------------------------------------
# profit and its derivatives
# ----------------------------------------------------------------------------

def profit(config: MarketConfig, P, i: int) -> float:
    return firm_model(config, i).evaluate(theta_of(config, P))["profit"]


def foc(config: MarketConfig, P, i: int, which: str = "both") -> float:
    """d profit_i / d (firm i's price). ``which`` picks the own, switch or both prices."""
    u = price_direction(config.n, i, which)
    return float(firm_model(config, i).evaluate(theta_of(config, P), dirs=[u])["grad"][0])


def foc_own(config, P, i):
    return foc(config, P, i, "own")


def foc_switch(config, P, i):
    return foc(config, P, i, "switch")


def soc(config: MarketConfig, P, i: int, which: str = "both") -> float:
    u = price_direction(config.n, i, which)
    return float(firm_model(config, i).evaluate(theta_of(config, P), pairs=[(u, u)])["hess"][0])


def cross_partial(config: MarketConfig, P, i: int, k: int, which: str = "both", which_k: str = "both") -> float:
    """d2 profit_i / d p_i d p_k."""
    if k == i:
        raise ValueError("cross_partial needs k != i")
    u = price_direction(config.n, i, which)
    w = price_direction(config.n, k, which_k)
    return float(firm_model(config, i).evaluate(theta_of(config, P), pairs=[(u, w)])["hess"][0])


@dataclass
class DfocDs:
    total: float
    stayers: float
    switchers: dict        # source firm -> contribution
    support_edge: float    # share of the block totals due to rival densities jumping at 0 or 1


def dfoc_ds(config: MarketConfig, P, i: int, which: str = "both", breakdown: bool = False):
    """d FOC_i / d s at fixed prices."""
    fm = firm_model(config, i)
    u = price_direction(config.n, i, which)
    res = fm.evaluate(theta_of(config, P), pairs=[(u, s_direction(config.n))])
    total = float(res["hess"][0])
    if not breakdown:
        return total
    blocks = res["hess_blocks"][0]
    return DfocDs(total, float(blocks[0]), {k: float(blocks[1 + c]) for c, k in enumerate(fm.rivals)},
                  float(res["hess_edge"][0]))


def dfoc_ds_fd(config: MarketConfig, P, i: int, h: float = 1e-5, which: str = "both") -> float:
    """Central difference of foc in s (test oracle and fallback)."""
    up = foc(config.with_s(config.s + h), P, i, which)
    dn = foc(config.with_s(config.s - h), P, i, which)
    return (up - dn) / (2.0 * h)


@dataclass
class DerivativeBundle:
    firm: int
    foc: float
    soc: float
    cross: dict
    dfoc_ds: float


def derivative_bundle(config: MarketConfig, P, i: int) -> DerivativeBundle:
    n = config.n
    u = price_direction(n, i)
    rivals = [k for k in range(n) if k != i]
    pairs = [(u, u)] + [(u, price_direction(n, k)) for k in rivals] + [(u, s_direction(n))]
    res = firm_model(config, i).evaluate(theta_of(config, P), dirs=[u], pairs=pairs)
    h = res["hess"]
    return DerivativeBundle(i, float(res["grad"][0]), float(h[0]),
                            {k: float(h[1 + c]) for c, k in enumerate(rivals)}, float(h[-1]))


def price_coordinates(config: MarketConfig):
    """(firm, which) for every price the firms choose, in Jacobian order."""
    if config.discriminatory:
        return [(i, "own") for i in range(config.n)] + [(i, "switch") for i in range(config.n)]
    return [(i, "both") for i in range(config.n)]


def foc_vector(config: MarketConfig, P) -> np.ndarray:
    coords = price_coordinates(config)
    theta = theta_of(config, P)
    out = np.empty(len(coords))
    for i in range(config.n):
        dirs = [(r, price_direction(config.n, i, w)) for r, (f, w) in enumerate(coords) if f == i]
        g = firm_model(config, i).evaluate(theta, dirs=[d for _, d in dirs])["grad"]
        for (r, _), val in zip(dirs, g):
            out[r] = val
    return out


def foc_jacobian(config: MarketConfig, P):
    """J[a, b] = d FOC_a / d price_b and the vector d FOC_a / d s.

    Rows and columns follow :func:`price_coordinates`.
    """
    coords = price_coordinates(config)
    n = config.n
    theta = theta_of(config, P)
    k = len(coords)
    J = np.empty((k, k))
    dFds = np.empty(k)
    sdir = s_direction(n)
    col_dirs = [price_direction(n, f, w) for f, w in coords]
    for i in range(n):
        rows = [r for r, (f, _) in enumerate(coords) if f == i]
        pairs = []
        for r in rows:
            u = price_direction(n, i, coords[r][1])
            pairs += [(u, w) for w in col_dirs] + [(u, sdir)]
        h = firm_model(config, i).evaluate(theta, pairs=pairs)["hess"].reshape(len(rows), k + 1)
        for t, r in enumerate(rows):
            J[r] = h[t, :k]
            dFds[r] = h[t, k]
    return J, dFds


__all__ = [
    "FirmModel", "QuadratureError", "DerivativeBundle", "DfocDs",
    "switch_cutoff", "demand", "demand_breakdown", "demand_discriminatory", "exit_mass",
    "profit", "foc", "foc_own", "foc_switch", "soc", "cross_partial", "dfoc_ds", "dfoc_ds_fd",
    "derivative_bundle", "foc_vector", "foc_jacobian", "price_coordinates", "theta_of",
]
