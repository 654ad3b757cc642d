"""Valuation distributions on [0, 1].

Every family is renormalised onto the unit interval. Public evaluators raise
:class:`DomainError` outside [0, 1]; the demand engine uses the ``*_ext``
evaluators, which extend F by 0/1 and the density by 0 outside the support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import kernels as K

FAMILIES = {
    "uniform": K.UNIFORM,
    "triangular-increasing": K.TRIANGULAR,
    "trapezoidal": K.TRAPEZOIDAL,
    "truncated-exponential": K.TRUNC_EXP,
    "truncated-normal": K.TRUNC_NORMAL,
    "truncated-pareto": K.TRUNC_PARETO,
    "piecewise-linear": K.PIECEWISE_LINEAR,
}

_ALIASES = {
    "triangular": "triangular-increasing",
    "trapezoid": "trapezoidal",
    "exponential": "truncated-exponential",
    "normal": "truncated-normal",
    "pareto": "truncated-pareto",
    "piecewise": "piecewise-linear",
}

_NPARAMS = {
    "uniform": 0,
    "triangular-increasing": 0,
    "trapezoidal": 1,
    "truncated-exponential": 1,
    "truncated-normal": 2,
    "truncated-pareto": 2,
}


class DomainError(ValueError):
    """Valuation argument outside [0, 1]."""


def _check_domain(v):
    arr = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"valuation outside [0, 1]: {v!r}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


@dataclass(frozen=True)
class ValuationDistribution:
    """A density/cdf pair on [0, 1].

    Parameters by family:

    - ``uniform``, ``triangular-increasing`` (f = 2v): none
    - ``trapezoidal``: ``(k,)`` with k > 2, f = min(k v, k - sqrt(k^2 - 2k))
    - ``truncated-exponential``: ``(rate,)``, f proportional to exp(-rate v); rate != 0
    - ``truncated-normal``: ``(mean, sd)``
    - ``truncated-pareto``: ``(shape, loc)`` with loc < 0, f proportional to (v - loc)^-(shape+1)
    - ``piecewise-linear``: density values at equally spaced knots 0, 1/m, ..., 1
      (m >= 1); values are rescaled to unit mass
    """

    family: str
    params: tuple = ()
    _kp: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        fam = _ALIASES.get(self.family, self.family)
        if fam not in FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}")
        params = tuple(float(x) for x in np.atleast_1d(self.params)) if len(np.atleast_1d(self.params)) else ()
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", params)
        expected = _NPARAMS.get(fam)
        if expected is not None and len(params) != expected:
            raise ValueError(f"{fam} takes {expected} parameter(s), got {len(params)}")
        object.__setattr__(self, "_kp", self._build_kernel_params())

    def _build_kernel_params(self):
        fam, p = self.family, self.params
        if fam in ("uniform", "triangular-increasing"):
            return np.zeros(1)
        if fam == "trapezoidal":
            k = p[0]
            if not k > 2.0:
                raise ValueError("trapezoidal needs k > 2")
            h = k - math.sqrt(k * k - 2.0 * k)
            return np.array([k, h, h / k])
        if fam == "truncated-exponential":
            rate = p[0]
            if rate == 0.0:
                raise ValueError("truncated-exponential rate must be nonzero (use uniform)")
            return np.array([rate, -math.expm1(-rate)])
        if fam == "truncated-normal":
            mean, sd = p
            if not sd > 0.0:
                raise ValueError("truncated-normal sd must be positive")
            a, b = -mean / sd, (1.0 - mean) / sd
            if a > 0.0:
                Z = special.ndtr(-a) - special.ndtr(-b)
            else:
                Z = special.ndtr(b) - special.ndtr(a)
            if not Z > 0.0:
                raise ValueError("truncated-normal has no mass on [0, 1]")
            return np.array([mean, sd, a, b, Z])
        if fam == "truncated-pareto":
            shape, loc = p
            if not shape > 0.0:
                raise ValueError("truncated-pareto shape must be positive")
            if not loc < 0.0:
                raise ValueError("truncated-pareto location must be negative")
            t0, t1 = (-loc) ** (-shape), (1.0 - loc) ** (-shape)
            return np.array([shape, loc, t0, t0 - t1])
        # piecewise-linear
        y = np.asarray(p, dtype=float)
        if y.size < 2:
            raise ValueError("piecewise-linear needs at least two knot values")
        if np.any(y < 0.0) or not np.all(np.isfinite(y)):
            raise ValueError("piecewise-linear values must be finite and nonnegative")
        m = y.size - 1
        area = float(np.sum(y[1:] + y[:-1]) / (2.0 * m))
        if not area > 0.0:
            raise ValueError("piecewise-linear density has zero mass")
        y = y / area
        cum = np.concatenate([[0.0], np.cumsum((y[1:] + y[:-1]) / (2.0 * m))])
        cum[-1] = 1.0
        return np.concatenate([[float(m)], y, cum])

    # -- kernel view ---------------------------------------------------------

    @property
    def code(self) -> int:
        return FAMILIES[self.family]

    @property
    def kernel_params(self) -> np.ndarray:
        return self._kp

    @property
    def kinks(self) -> np.ndarray:
        """Interior points where the density derivative jumps."""
        if self.family == "trapezoidal":
            return np.array([self._kp[2]])
        if self.family == "piecewise-linear":
            m = int(self._kp[0])
            y = self._kp[1:m + 2]
            slopes = np.diff(y)
            idx = np.nonzero(np.abs(np.diff(slopes)) > 1e-14 * max(1.0, float(np.max(np.abs(y)))))[0] + 1
            return idx / m
        return np.empty(0)

    @property
    def has_kinks(self) -> bool:
        return self.kinks.size > 0

    @property
    def edge_densities(self) -> tuple[float, float]:
        """(f(0+), f(1-)): jump sizes of the extended density at the support ends."""
        return float(K.np_pdf(self.code, self._kp, 0.0)), float(K.np_pdf(self.code, self._kp, 1.0))

    def to_dict(self) -> dict:
        return {"family": self.family, "params": list(self.params)}

    # -- public evaluators ---------------------------------------------------

    def pdf(self, v):
        x = _check_domain(v)
        return _out(K.np_pdf(self.code, self._kp, x), v)

    def cdf(self, v):
        x = _check_domain(v)
        return _out(K.np_cdf_ext(self.code, self._kp, x), v)

    def dpdf(self, v, with_flag=False):
        """f'(v); the left derivative at kinks. ``with_flag`` adds a kink mask."""
        x = _check_domain(v)
        val = _out(K.np_dpdf(self.code, self._kp, x), v)
        return (val, self.at_kink(v)) if with_flag else val

    def d2pdf(self, v, with_flag=False):
        x = _check_domain(v)
        val = _out(K.np_d2pdf(self.code, self._kp, x), v)
        return (val, self.at_kink(v)) if with_flag else val

    def at_kink(self, v, atol=1e-12):
        x = np.asarray(v, dtype=float)
        kinks = self.kinks
        if kinks.size == 0:
            flag = np.zeros(x.shape, dtype=bool)
        else:
            flag = np.any(np.abs(x[..., None] - kinks) <= atol, axis=-1)
        return bool(flag) if np.ndim(v) == 0 else flag

    def sample(self, u):
        """Inverse cdf. ``u`` is a uniform draw in (0, 1)."""
        arr = np.asarray(u, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DomainError(f"uniform draw outside [0, 1]: {u!r}")
        return _out(K.np_ppf(self.code, self._kp, arr), u)

    ppf = sample

    # -- extended evaluators (any real argument) -----------------------------

    def cdf_ext(self, x):
        return K.np_cdf_ext(self.code, self._kp, x)

    def pdf_ext(self, x):
        return K.np_pdf_ext(self.code, self._kp, x)

    def dpdf_ext(self, x):
        return K.np_dpdf_ext(self.code, self._kp, x)


def make_distribution(spec) -> ValuationDistribution:
    """Build from a ``{"family": ..., "params": [...]}`` mapping or pass through."""
    if isinstance(spec, ValuationDistribution):
        return spec
    if isinstance(spec, str):
        return ValuationDistribution(spec)
    return ValuationDistribution(spec["family"], tuple(spec.get("params", ())))


uniform = ValuationDistribution("uniform")
triangular = ValuationDistribution("triangular-increasing")


# ----------------------------------------------------------------------------
# sufficient-condition predicates
# ----------------------------------------------------------------------------

@dataclass
class ConditionEntry:
    name: str
    holds: bool
    margin: float            # min over the grid of (lhs - rhs); >= 0 means holds
    worst_price: float
    worst_point: float       # the density argument x = P + w at the worst cell
    kink_points: tuple = ()

    def as_row(self) -> dict:
        return {
            "condition": self.name,
            "holds": self.holds,
            "margin": self.margin,
            "worst_price": self.worst_price,
            "worst_point": self.worst_point,
        }


CONDITION_NAMES = ("pure_best_response", "strategic_complements", "price_falls_in_s", "ccdf_concave")


def check_conditions(dist: ValuationDistribution, c: float = 0.0, grid_n: int = 201,
                     atol: float = 1e-12) -> list[ConditionEntry]:
    """Evaluate the sufficient conditions on a grid of (P, x = P + w) pairs.

    P and x both range over the open interval (c, 1). Verdicts only certify
    the grid, not the continuum.

    - ``pure_best_response``: (P - c) f'(x) >= -2 f(x)
    - ``strategic_complements``: f(x) + (P - c) f'(x) >= 0
    - ``price_falls_in_s``: f(x) + (P - c) f'(x) >= 0 and f'(x) + (P - c) f''(x) >= 0
      for x in [P, 1)
    - ``ccdf_concave``: 1 - F concave on [0, 1], i.e. f' >= 0
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    if not c < 1.0:
        raise ValueError("marginal cost must be below 1")
    lo = max(c, 0.0)
    pts = np.linspace(lo, 1.0, grid_n + 2)[1:-1]
    P, X = np.meshgrid(pts, pts, indexing="ij")
    f = dist.pdf(X)
    d1 = dist.dpdf(X)
    d2 = dist.d2pdf(X)
    markup = P - c

    def entry(name, margin, mask=None):
        m = np.where(mask, margin, np.inf) if mask is not None else margin
        idx = np.unravel_index(np.argmin(m), m.shape)
        worst = float(m[idx])
        return ConditionEntry(name, bool(worst >= -atol), worst, float(P[idx]), float(X[idx]),
                              tuple(float(k) for k in dist.kinks))

    out = [
        entry("pure_best_response", markup * d1 + 2.0 * f),
        entry("strategic_complements", f + markup * d1),
        entry("price_falls_in_s", np.minimum(f + markup * d1, d1 + markup * d2), mask=X >= P),
    ]
    grid01 = np.linspace(0.0, 1.0, grid_n)
    d_all = dist.dpdf(grid01)
    k = int(np.argmin(d_all))
    out.append(ConditionEntry("ccdf_concave", bool(d_all[k] >= -atol), float(d_all[k]), float("nan"),
                              float(grid01[k]), tuple(float(x) for x in dist.kinks)))
    return out
