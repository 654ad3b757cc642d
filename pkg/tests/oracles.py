"""Independent reference computations used by the tests.

Nothing here imports the demand engine: uniform-duopoly demand comes from
clipping polygons in the valuation square, and generic demand from nested
scipy quadrature of the choice rule written out by hand.
"""
import numpy as np
from scipy import integrate


def clip_polygon(poly, a, b, c):
    """Keep the part of ``poly`` where a*x + b*y <= c (Sutherland-Hodgman)."""
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        fp = a * p[0] + b * p[1] - c
        fq = a * q[0] + b * q[1] - c
        if fp <= 0:
            out.append(p)
        if fp * fq < 0:
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x = np.array([p[0] for p in poly])
    y = np.array([p[1] for p in poly])
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


UNIT = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def uniform_duopoly_masses(P, s, mu=(0.5, 0.5), exit_allowed=True):
    """(stay, switch-in) mass per firm for uniform valuations, by polygon area.

    Coordinates are (v_i, v_j) with i the firm whose demand is computed.
    """
    out = []
    for i in (0, 1):
        j = 1 - i
        pi, pj = P[i], P[j]
        # start at i, stay: v_i - p_i >= v_j - p_j - s, and v_i >= p_i
        poly = clip_polygon(UNIT, -1.0, 1.0, pj + s - pi)
        if exit_allowed:
            poly = clip_polygon(poly, -1.0, 0.0, -pi)
        stay = mu[i] * polygon_area(poly)
        # start at j, switch to i: v_i - p_i - s >= v_j - p_j, and v_i >= p_i + s
        poly = clip_polygon(UNIT, -1.0, 1.0, pj - pi - s)
        if exit_allowed:
            poly = clip_polygon(poly, -1.0, 0.0, -(pi + s))
        switch = mu[j] * polygon_area(poly)
        out.append((stay, switch))
    return out


def nested_demand(dists, mu, P, s, i, exit_allowed=True):
    """Firm i's demand in a duopoly by a 2-d scipy quadrature of the indicator.

    The inner integral runs over v_i with the cutoff computed explicitly, so
    each inner integrand is smooth.
    """
    j = 1 - i
    fi, fj = dists[i], dists[j]

    def tail(a):
        a = min(max(a, 0.0), 1.0)
        return 1.0 - fi.cdf(a)

    def stay_inner(vj):
        cut = P[i] + (max(0.0, vj - P[j] - s) if exit_allowed else vj - P[j] - s)
        return fj.pdf(vj) * tail(cut)

    def switch_inner(vj):
        w = vj - P[j] + s
        if exit_allowed:
            w = max(w, s)
        return fj.pdf(vj) * tail(P[i] + w)

    # the inner tail changes form wherever the cutoff crosses 0, 1 or a kink of f_i,
    # and f_j itself may kink
    targets = [0.0, 1.0, *fi.kinks]
    raw = [P[j], P[j] + s, *fj.kinks]
    raw += [t - P[i] + P[j] + s for t in targets] + [t - P[i] + P[j] - s for t in targets]
    pts = sorted({x for x in raw if 0.0 < x < 1.0})
    opts = dict(points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=400)
    stay = integrate.quad(stay_inner, 0.0, 1.0, **opts)[0]
    switch = integrate.quad(switch_inner, 0.0, 1.0, **opts)[0]
    return mu[i] * stay, mu[j] * switch


def grid_best_response(profit_fn, n_points=10_001):
    grid = np.linspace(0.0, 1.0, n_points)
    vals = np.array([profit_fn(p) for p in grid])
    return grid[int(np.argmax(vals))], vals
