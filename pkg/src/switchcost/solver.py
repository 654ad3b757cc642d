"""Best responses, equilibria, stability and comparative statics in s."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import demand as dm
from .distributions import check_conditions
from .market import MarketConfig, PriceProfile, validate

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateEquilibrium(ArithmeticError):
    """FOC Jacobian is singular at the candidate equilibrium."""


class ComparativeStaticsError(RuntimeError):
    def __init__(self, s, result):
        super().__init__(f"equilibrium re-solve failed at s={s!r} (residual {result.residual:.3e})")
        self.s = s
        self.result = result


@dataclass
class SolverOptions:
    damping: float = 0.5
    tol: float = 1e-7
    max_iter: int = 500
    grid_points: int = 201
    delta_s: float = 1e-3
    foc_tol: float = 1e-7
    width: float = 1e-9

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        opts = cls()
        for k, v in d.items():
            if not hasattr(opts, k):
                raise ValueError(f"unknown solver option {k!r}")
            setattr(opts, k, type(getattr(opts, k))(v))
        if not 0.0 < opts.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if opts.grid_points < 3:
            raise ValueError("grid_points must be at least 3")
        return opts


# ----------------------------------------------------------------------------
# best response
# ----------------------------------------------------------------------------

def _segment(config: MarketConfig, i: int, which: str):
    """(theta coordinates set by the price, blocks whose profit depends on it)."""
    n = config.n
    if which == "both":
        return [i, n + i], None
    if which == "own":
        return [i], [0]
    return [n + i], list(range(1, n))


def golden_section_max(f, a, b, width=1e-9, fa_hint=None):
    """Maximise a unimodal ``f`` on [a, b] until the bracket is narrower than ``width``.

    Returns (x, f(x)) for the best point evaluated.
    """
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
            if fc > best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
            if fd > best[1]:
                best = (d, fd)
    return best


def _br_1d(config: MarketConfig, theta, i: int, which: str, opts: SolverOptions):
    fm = dm.firm_model(config, i)
    coords, subset = _segment(config, i, which)
    grid = np.linspace(0.0, 1.0, opts.grid_points)
    thetas = np.repeat(theta[None, :], grid.size, axis=0)
    thetas[:, coords] = grid[:, None]
    prof = fm.profit_curve(thetas, subset)
    k = int(np.argmax(prof))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]

    def f(p):
        t = theta.copy()
        t[coords] = p
        return float(fm.profit_curve(t[None, :], subset)[0])

    x, fx = golden_section_max(f, a, b, opts.width)
    if prof[k] > fx:
        x, fx = grid[k], float(prof[k])

    # Newton polish on the first-order condition; kept only if profit does not drop
    u = dm.price_direction(config.n, i, which)
    for _ in range(3):
        if not 0.0 < x < 1.0:
            break
        t = theta.copy()
        t[coords] = x
        res = fm.evaluate(t, dirs=[u], pairs=[(u, u)])
        g, h = res["grad"][0], res["hess"][0]
        if not h < 0.0 or abs(g) < 1e-14:
            break
        xn = min(max(x - g / h, a), b)
        fn = f(xn)
        if fn < fx - 1e-15 * max(1.0, abs(fx)):
            break
        x, fx = xn, max(fn, fx)
    return x


def best_response(config: MarketConfig, P_others, i: int, opts: SolverOptions = None):
    """Profit-maximising price of firm i given rivals' prices.

    ``P_others`` is either a full price profile (firm i's entry is ignored)
    or the n-1 rival prices in index order. In discriminatory mode the
    result is the pair (own price, switcher price).
    """
    opts = opts or SolverOptions()
    arr = np.asarray(P_others.as_array(config.discriminatory) if isinstance(P_others, PriceProfile) else P_others,
                     dtype=float)
    if arr.shape[0] == config.n - 1:
        arr = np.insert(arr, i, 0.5 if arr.ndim == 1 else [0.5, 0.5], axis=0)
    theta = dm.theta_of(config, arr)
    if config.discriminatory:
        return (_br_1d(config, theta, i, "own", opts), _br_1d(config, theta, i, "switch", opts))
    return _br_1d(config, theta, i, "both", opts)


# ----------------------------------------------------------------------------
# equilibrium
# ----------------------------------------------------------------------------

@dataclass
class StabilityReport:
    stable: bool
    jacobian: np.ndarray
    sym_eigenvalues: np.ndarray
    br_spectral_radius: float
    negative_semidefinite: bool
    br_contraction: bool

    @property
    def criteria_agree(self) -> bool:
        return self.negative_semidefinite == self.br_contraction


@dataclass
class EquilibriumResult:
    prices: PriceProfile
    iterations: int
    converged: bool
    residual: float
    stable: bool = None
    extremal_gap: float = None
    diagnostics: dict = field(default_factory=dict)
    stability: StabilityReport = None
    heuristic: bool = False
    s: float = None

    def vector(self, discriminatory=None):
        """Prices as a flat vector in Jacobian order."""
        if discriminatory is None:
            discriminatory = not self.prices.uniform
        if discriminatory:
            return np.concatenate([self.prices.own, self.prices.switch])
        return self.prices.own.copy()


def _to_profile(config, x):
    if config.discriminatory:
        return PriceProfile(x[:config.n], x[config.n:])
    return PriceProfile(x)


def _start_vector(config, start):
    n = config.n
    k = 2 * n if config.discriminatory else n
    if start is None:
        return np.full(k, 0.5)
    if isinstance(start, PriceProfile):
        return np.concatenate([start.own, start.switch]) if config.discriminatory else start.own.copy()
    arr = np.asarray(start, dtype=float)
    if arr.ndim == 0:
        return np.full(k, float(arr))
    if config.discriminatory:
        if arr.shape == (n, 2):
            return np.concatenate([arr[:, 0], arr[:, 1]])
        if arr.shape == (n,):
            return np.concatenate([arr, arr])
    if arr.size != k:
        raise ValueError(f"start has {arr.size} entries, expected {k}")
    return arr.reshape(-1).copy()


def foc_residual(config: MarketConfig, x) -> float:
    """Sup-norm FOC violation, one-sided at the price bounds."""
    g = dm.foc_vector(config, _to_profile(config, x))
    viol = np.where(x <= 0.0, np.maximum(g, 0.0), np.where(x >= 1.0, np.maximum(-g, 0.0), np.abs(g)))
    return float(np.max(viol))


def _br_vector(config, x, opts, cache):
    n = config.n
    if config.discriminatory:
        po, ps = x[:n], x[n:]
    else:
        po = ps = x
    theta = np.concatenate([po, ps, [config.s]])
    out = np.empty_like(x)
    for i in range(n):
        key = _signature_key(config, po, ps, i)
        if key not in cache:
            if config.discriminatory:
                cache[key] = (_br_1d(config, theta, i, "own", opts), _br_1d(config, theta, i, "switch", opts))
            else:
                cache[key] = _br_1d(config, theta, i, "both", opts)
        if config.discriminatory:
            out[i], out[n + i] = cache[key]
        else:
            out[i] = cache[key]
    return out


def _signature_key(config, po, ps, i):
    rivals = tuple(sorted((config.dists[j].family, config.dists[j].params,
                           config.mu[j], float(po[j]), float(ps[j])) for j in range(config.n) if j != i))
    d = config.dists[i]
    return (d.family, d.params, config.mu[i], config.c[i], rivals)


def solve_equilibrium(config: MarketConfig, start=None, damping=None, tol=None, max_iter=None,
                      opts: SolverOptions = None, diagnostics: bool = True) -> EquilibriumResult:
    """Damped simultaneous best-response iteration P <- (1-lambda) P + lambda BR(P)."""
    validate(config)
    opts = SolverOptions(**vars(opts)) if opts else SolverOptions()
    if damping is not None:
        opts.damping = damping
    if tol is not None:
        opts.tol = tol
    if max_iter is not None:
        opts.max_iter = max_iter
    x = np.clip(_start_vector(config, start), 0.0, 1.0)
    lam = opts.damping
    converged = False
    residual = float("inf")
    it = 0
    for it in range(1, opts.max_iter + 1):
        br = _br_vector(config, x, opts, {})
        new = (1.0 - lam) * x + lam * br
        step = float(np.max(np.abs(new - x)))
        x = new
        if step <= opts.tol:
            residual = foc_residual(config, x)
            if residual <= opts.foc_tol:
                converged = True
                break
    if not converged:
        residual = foc_residual(config, x)
    res = EquilibriumResult(_to_profile(config, x), it, converged, residual, s=config.s)
    if diagnostics and converged:
        try:
            rep = check_stability(config, res.prices)
            res.stability = rep
            res.stable = rep.stable
        except DegenerateEquilibrium:
            res.stable = False
        res.diagnostics = condition_diagnostics(config)
    return res


def condition_diagnostics(config: MarketConfig) -> dict:
    out = {}
    for i, d in enumerate(config.dists):
        key = (d, config.c[i])
        if key not in out:
            out[key] = check_conditions(d, config.c[i])
    return {i: out[(d, config.c[i])] for i, d in enumerate(config.dists)}


def strategic_complements_on_grid(config: MarketConfig, points=(0.1, 0.3, 0.5, 0.7, 0.9)) -> bool:
    """Cross-partials of profit nonnegative on a check grid.

    Firms that are identical up to labels are checked once; rivals not in the
    pair sit at 0.5.
    """
    n = config.n
    seen = set()
    for i in range(n):
        for k in range(n):
            if k == i:
                continue
            key = (config.dists[i], config.mu[i], config.c[i], config.dists[k], config.mu[k])
            if key in seen:
                continue
            seen.add(key)
            for pi in points:
                for pk in points:
                    P = np.full(n, 0.5)
                    P[i], P[k] = pi, pk
                    if config.discriminatory:
                        Pd = np.column_stack([P, P])
                        vals = [dm.cross_partial(config, Pd, i, k, wi, wk)
                                for wi in ("own", "switch") for wk in ("own", "switch")]
                    else:
                        vals = [dm.cross_partial(config, P, i, k)]
                    if min(vals) < -1e-10:
                        return False
    return True


def extremal_equilibria(config: MarketConfig, opts: SolverOptions = None):
    """Best-response iteration from the lowest and the highest price profile."""
    k = 2 * config.n if config.discriminatory else config.n
    low = solve_equilibrium(config, np.zeros(k), opts=opts)
    high = solve_equilibrium(config, np.ones(k), opts=opts)
    gap = float(np.max(np.abs(low.vector(config.discriminatory) - high.vector(config.discriminatory))))
    heuristic = not strategic_complements_on_grid(config)
    for r in (low, high):
        r.extremal_gap = gap
        r.heuristic = heuristic
    return low, high


# ----------------------------------------------------------------------------
# stability and uniqueness
# ----------------------------------------------------------------------------

def _has_kinks(config):
    return any(d.has_kinks for d in config.dists)


def jacobian(config: MarketConfig, P, fd_step: float = 1e-4):
    """(J, dFOC/ds). Central differences of the FOC vector replace the
    analytic second derivatives when some density has kinks."""
    if not _has_kinks(config):
        return dm.foc_jacobian(config, P)
    x = _start_vector(config, P)
    k = x.size
    J = np.empty((k, k))
    for b in range(k):
        e = np.zeros(k)
        e[b] = fd_step
        J[:, b] = (dm.foc_vector(config, _to_profile(config, np.clip(x + e, 0, 1)))
                   - dm.foc_vector(config, _to_profile(config, np.clip(x - e, 0, 1)))) / (2 * fd_step)
    prof = _to_profile(config, x)
    dF = (dm.foc_vector(config.with_s(config.s + fd_step), prof)
          - dm.foc_vector(config.with_s(config.s - fd_step), prof)) / (2 * fd_step)
    return J, dF


def stability_from_jacobian(J, eig_tol: float = 1e-9) -> StabilityReport:
    J = np.asarray(J, dtype=float)
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
        raise DegenerateEquilibrium("degenerate equilibrium")
    sym = 0.5 * (J + J.T)
    eig = np.linalg.eigvalsh(sym)
    nsd = bool(np.all(eig <= eig_tol))
    diag = np.diag(J)
    if np.any(diag == 0.0):
        rho = float("inf")
    else:
        R = -J / diag[:, None]
        np.fill_diagonal(R, 0.0)
        rho = float(np.max(np.abs(np.linalg.eigvals(R)))) if J.shape[0] > 1 else 0.0
    contraction = rho < 1.0
    return StabilityReport(nsd and contraction, J, eig, rho, nsd, contraction)


def check_stability(config: MarketConfig, P_star) -> StabilityReport:
    J, _ = jacobian(config, P_star)
    return stability_from_jacobian(J)


@dataclass
class UniquenessReport:
    row_sums: np.ndarray
    verdicts: np.ndarray

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.verdicts))


def uniqueness_diagnostic(config: MarketConfig, P_star) -> UniquenessReport:
    """Row sums of the FOC Jacobian: own second derivative plus all cross terms."""
    J, _ = jacobian(config, P_star)
    rs = J.sum(axis=1)
    return UniquenessReport(rs, rs < 0.0)


# ----------------------------------------------------------------------------
# comparative statics
# ----------------------------------------------------------------------------

@dataclass
class ComparativeStaticsResult:
    dPds_fd: np.ndarray
    dPds_ift: np.ndarray
    agreement: float
    prices: np.ndarray
    prices_minus: np.ndarray
    prices_plus: np.ndarray
    dfoc_ds: np.ndarray
    jacobian: np.ndarray


def comparative_statics(config: MarketConfig, delta_s: float = None, P_star=None,
                        opts: SolverOptions = None) -> ComparativeStaticsResult:
    """dP*/ds by re-solving at s +/- delta_s and by the implicit function theorem."""
    opts = SolverOptions(**vars(opts)) if opts else SolverOptions()
    ds = opts.delta_s if delta_s is None else delta_s
    if not config.s - ds > 0.0:
        raise ValueError(f"delta_s={ds} too large for s={config.s}")
    # the finite difference divides by 2 ds, so solve well below the default tolerance
    fine = SolverOptions(**vars(opts))
    fine.tol = min(opts.tol, 1e-10)
    fine.foc_tol = min(opts.foc_tol, 1e-10)
    if P_star is None:
        base = solve_equilibrium(config, opts=fine, diagnostics=False)
        if not base.converged:
            raise ComparativeStaticsError(config.s, base)
        x0 = base.vector(config.discriminatory)
    else:
        x0 = _start_vector(config, P_star)
    sols = []
    for s in (config.s - ds, config.s + ds):
        r = solve_equilibrium(config.with_s(s), start=x0, opts=fine, diagnostics=False)
        if not r.converged:
            raise ComparativeStaticsError(s, r)
        sols.append(r.vector(config.discriminatory))
    fd = (sols[1] - sols[0]) / (2.0 * ds)
    J, dF = jacobian(config, _to_profile(config, x0))
    try:
        ift = -np.linalg.solve(J, dF)
    except np.linalg.LinAlgError:
        raise DegenerateEquilibrium("degenerate equilibrium") from None
    return ComparativeStaticsResult(fd, ift, float(np.max(np.abs(fd - ift))), x0, sols[0], sols[1], dF, J)
