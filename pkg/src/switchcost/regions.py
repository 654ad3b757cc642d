"""Duopoly choice regions over the valuation square and their marginal sets.

Panels are indexed by the consumer's initial firm (0 = X, 1 = Y). Cell
labels use the oracle's decision codes: -1 exit, otherwise the firm bought
from.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from . import kernels as K
from .market import MarketConfig, as_prices
from .oracle import EXIT

SQRT2 = float(np.sqrt(2.0))
PANEL_NAMES = ("X", "Y")


@dataclass
class Polyline:
    panel: int        # initial firm
    firm: int         # firm whose marginal consumers the line carries
    kind: str         # which two options are tied, e.g. "0|exit" or "0|1"
    points: np.ndarray

    @property
    def length(self):
        if len(self.points) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


@dataclass
class RegionGrid:
    prices_own: np.ndarray
    prices_switch: np.ndarray
    s: float
    resolution: int
    exit_allowed: bool
    labels: dict                      # panel -> (R, R) int8, indexed [ix, iy]
    polylines: list = field(default_factory=list)

    @property
    def centers(self):
        return (np.arange(self.resolution) + 0.5) / self.resolution


def _labels(po, ps, s, init, exit_allowed, vx, vy):
    """Vectorised consumer choice for a duopoly on coordinate arrays."""
    other = 1 - init
    v = (vx, vy)
    u_stay = v[init] - po[init]
    u_sw = v[other] - ps[other] - s
    # initial firm wins ties against the rival, buying wins ties against exit
    lab = np.where(u_sw > u_stay, other, init).astype(np.int8)
    best = np.maximum(u_stay, u_sw)
    if exit_allowed:
        lab = np.where(best < 0.0, EXIT, lab).astype(np.int8)
    return lab


def _clip_segment(p0, p1):
    """Clip the segment p0-p1 to the unit square (Liang-Barsky)."""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for k in range(2):
        for q, r in ((-d[k], p0[k]), (d[k], 1.0 - p0[k])):
            if q == 0.0:
                if r < 0.0:
                    return None
                continue
            t = r / q
            if q < 0.0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
    if t0 >= t1:
        return None
    return np.array([p0 + t0 * d, p0 + t1 * d])


def analytic_polylines(po, ps, s, exit_allowed=True) -> list[Polyline]:
    """Straight-line boundaries between the options in each panel."""
    out = []
    for init in (0, 1):
        other = 1 - init
        a_stay = po[init]           # stay iff v_init >= a_stay (vs exit)
        a_sw = ps[other] + s        # switch iff v_other >= a_sw (vs exit)

        def pt(v_init, v_other):
            return (v_init, v_other) if init == 0 else (v_other, v_init)

        segs = []
        if exit_allowed:
            segs.append((init, f"{init}|exit", pt(a_stay, 0.0), pt(a_stay, a_sw)))
            segs.append((other, f"{other}|exit", pt(0.0, a_sw), pt(a_stay, a_sw)))
            # indifference between the two firms, above both exit thresholds
            segs.append((None, f"{min(init, other)}|{max(init, other)}", pt(a_stay, a_sw),
                         pt(a_stay + 2.0, a_sw + 2.0)))
        else:
            segs.append((None, f"{min(init, other)}|{max(init, other)}", pt(a_stay - 2.0, a_sw - 2.0),
                         pt(a_stay + 2.0, a_sw + 2.0)))
        for firm, kind, p0, p1 in segs:
            seg = _clip_segment(p0, p1)
            if seg is None:
                continue
            firms = (init, other) if firm is None else (firm,)
            for f in sorted(firms):
                out.append(Polyline(init, f, kind, seg))
    return out


def region_grid(config: MarketConfig, P, resolution: int = 400) -> RegionGrid:
    if config.n != 2:
        raise ValueError("region grids are defined for duopolies")
    po, ps = as_prices(config, P)
    c = (np.arange(resolution) + 0.5) / resolution
    VX, VY = np.meshgrid(c, c, indexing="ij")
    labels = {init: _labels(po, ps, config.s, init, config.exit_allowed, VX, VY) for init in (0, 1)}
    return RegionGrid(po, ps, config.s, resolution, config.exit_allowed, labels,
                      analytic_polylines(po, ps, config.s, config.exit_allowed))


def marginal_field(po, ps, s, init, firm, exit_allowed, vx, vy):
    """Continuous field whose zero set is the boundary of ``firm``'s region."""
    other = 1 - init
    v = (vx, vy)
    u = {init: v[init] - po[init], other: v[other] - ps[other] - s}
    rest = u[1 - firm]
    if exit_allowed:
        rest = np.maximum(rest, 0.0)
    return u[firm] - rest


def marginal_contours(config: MarketConfig, P, init: int, firm: int, resolution: int = 400):
    """Grid-traced marginal set of ``firm`` in panel ``init`` (list of (k, 2) arrays)."""
    po, ps = as_prices(config, P)
    nodes = np.linspace(0.0, 1.0, resolution + 1)
    VX, VY = np.meshgrid(nodes, nodes, indexing="ij")
    g = marginal_field(po, ps, config.s, init, firm, config.exit_allowed, VX, VY)
    return [c / resolution for c in measure.find_contours(g, 0.0)]


def _line_mass(config, curves):
    """Length of the curves weighted by the joint valuation density."""
    dx, dy = config.dists
    total = 0.0
    for c in curves:
        mid = 0.5 * (c[1:] + c[:-1])
        seg = np.linalg.norm(np.diff(c, axis=0), axis=1)
        dens = K.np_pdf_ext(dx.code, dx.kernel_params, mid[:, 0]) * K.np_pdf_ext(dy.code, dy.kernel_params, mid[:, 1])
        total += float(np.sum(seg * dens))
    return total


@dataclass
class PanelMasses:
    panel: int
    stay: float
    switch: float
    exit: float
    marginal_length: dict       # firm -> grid-traced length
    marginal_length_exact: dict  # firm -> analytic polyline length
    marginal_mass: dict          # firm -> mu_init * density-weighted grid length


def region_masses(config: MarketConfig, P, resolution: int = 400) -> list[PanelMasses]:
    """Grid masses of each region per panel, weighted by mu and the densities."""
    grid = region_grid(config, P, resolution)
    c = grid.centers
    dx, dy = config.dists
    w = np.outer(K.np_pdf(dx.code, dx.kernel_params, c), K.np_pdf(dy.code, dy.kernel_params, c)) / resolution ** 2
    exact = {}
    for pl in grid.polylines:
        exact[(pl.panel, pl.firm)] = exact.get((pl.panel, pl.firm), 0.0) + pl.length
    out = []
    for init in (0, 1):
        lab = grid.labels[init]
        mu = config.mu[init]
        lengths, masses = {}, {}
        for firm in (0, 1):
            curves = marginal_contours(config, P, init, firm, resolution)
            lengths[firm] = float(sum(np.sum(np.linalg.norm(np.diff(cv, axis=0), axis=1)) for cv in curves))
            masses[firm] = mu * _line_mass(config, curves)
        out.append(PanelMasses(
            init,
            stay=mu * float(w[lab == init].sum()),
            switch=mu * float(w[lab == 1 - init].sum()),
            exit=mu * float(w[lab == EXIT].sum()),
            marginal_length=lengths,
            marginal_length_exact={f: exact.get((init, f), 0.0) for f in (0, 1)},
            marginal_mass=masses,
        ))
    return out


@dataclass
class MarginalFactors:
    left: float           # -d(length of Y's marginal set, initial X) / ds
    right: float          # -d(length of Y's marginal set, initial Y) / ds
    left_exact: float
    right_exact: float


def marginal_factors(config: MarketConfig, P, s0: float, s1: float, resolution: int = 400,
                     firm: int = 1) -> MarginalFactors:
    """Rate at which firm ``firm``'s marginal-consumer lines shrink as s rises from s0 to s1."""
    ds = s1 - s0
    lens, exact = [], []
    for s in (s0, s1):
        masses = region_masses(config.with_s(s), P, resolution)
        lens.append([m.marginal_length[firm] for m in masses])
        exact.append([m.marginal_length_exact[firm] for m in masses])
    lens, exact = np.array(lens), np.array(exact)
    rate = -(lens[1] - lens[0]) / ds
    rate_exact = -(exact[1] - exact[0]) / ds
    return MarginalFactors(float(rate[0]), float(rate[1]), float(rate_exact[0]), float(rate_exact[1]))
