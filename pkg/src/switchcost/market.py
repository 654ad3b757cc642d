"""Market configuration, validation and scenario files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .distributions import ValuationDistribution, make_distribution, uniform

PRICING_MODES = ("uniform", "discriminatory")
SHARE_TOL = 1e-12


class ValidationError(ValueError):
    """One or more configuration invariants are violated."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ScenarioError(ValueError):
    """Scenario file cannot be parsed."""


@dataclass(frozen=True)
class MarketConfig:
    n: int
    mu: tuple
    c: tuple
    s: float
    dists: tuple
    pricing_mode: str = "uniform"
    exit_allowed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(x) for x in np.atleast_1d(self.mu)))
        object.__setattr__(self, "c", tuple(float(x) for x in np.atleast_1d(self.c)))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "dists", tuple(make_distribution(d) for d in self.dists))

    @classmethod
    def symmetric(cls, n=2, s=0.1, dist=uniform, c=0.0, **kw):
        return cls(n, (1.0 / n,) * n, (float(c),) * n, s, (make_distribution(dist),) * n, **kw)

    def with_s(self, s):
        return replace(self, s=float(s))

    @property
    def discriminatory(self) -> bool:
        return self.pricing_mode == "discriminatory"

    def is_symmetric(self) -> bool:
        return len(set(self.mu)) == 1 and len(set(self.c)) == 1 and len(set(self.dists)) == 1

    def to_dict(self) -> dict:
        return {
            "firms": self.n,
            "mu": list(self.mu),
            "costs": list(self.c),
            "s": self.s,
            "distributions": [d.to_dict() for d in self.dists],
            "pricing_mode": self.pricing_mode,
            "exit_allowed": self.exit_allowed,
        }


def config_errors(config: MarketConfig) -> list[str]:
    """Every violated invariant, in a fixed order. Empty when valid."""
    errs = []
    n = config.n
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 2:
        errs.append(f"firm count must be an integer >= 2, got {n!r}")
        n = None
    for name, vec in (("mu", config.mu), ("costs", config.c), ("distributions", config.dists)):
        if n is not None and len(vec) != n:
            errs.append(f"{name} has length {len(vec)}, expected {n}")
    mu = np.asarray(config.mu, dtype=float)
    if mu.size and not np.all(np.isfinite(mu)):
        errs.append("shares must be finite")
    else:
        bad = [i for i, m in enumerate(mu) if not 0.0 < m < 1.0]
        if bad:
            errs.append(f"shares must lie in (0, 1); offending firms {bad}")
        total = float(mu.sum())
        if abs(total - 1.0) > SHARE_TOL:
            errs.append(f"shares sum to {total:.12g}")
    if not np.isfinite(config.s) or not config.s > 0.0:
        errs.append("switching cost must be positive")
    bad = [i for i, ci in enumerate(config.c) if not (np.isfinite(ci) and 0.0 <= ci < 1.0)]
    if bad:
        errs.append(f"marginal costs must lie in [0, 1); offending firms {bad}")
    if config.pricing_mode not in PRICING_MODES:
        errs.append(f"pricing_mode must be one of {PRICING_MODES}, got {config.pricing_mode!r}")
    if not isinstance(config.exit_allowed, (bool, np.bool_)):
        errs.append("exit_allowed must be a boolean")
    return errs


def validate(config: MarketConfig) -> MarketConfig:
    """Return ``config`` unchanged if valid, else raise :class:`ValidationError`."""
    errs = config_errors(config)
    if errs:
        raise ValidationError(errs)
    return config


# ----------------------------------------------------------------------------
# prices
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PriceProfile:
    """Per-firm prices. ``switch`` equals ``own`` in uniform mode."""

    own: np.ndarray
    switch: np.ndarray = field(default=None)

    def __post_init__(self):
        own = np.asarray(self.own, dtype=float).copy()
        sw = own.copy() if self.switch is None else np.asarray(self.switch, dtype=float).copy()
        if own.shape != sw.shape or own.ndim != 1:
            raise ValueError("own and switch prices must be 1-d and of equal length")
        if np.any(~np.isfinite(own)) or np.any(~np.isfinite(sw)):
            raise ValueError("prices must be finite")
        if np.any(own < 0) or np.any(own > 1) or np.any(sw < 0) or np.any(sw > 1):
            raise ValueError("prices must lie in [0, 1]")
        own.flags.writeable = False
        sw.flags.writeable = False
        object.__setattr__(self, "own", own)
        object.__setattr__(self, "switch", sw)

    @property
    def n(self):
        return self.own.size

    @property
    def uniform(self) -> bool:
        return bool(np.array_equal(self.own, self.switch))

    def as_array(self, discriminatory=False):
        if discriminatory:
            return np.column_stack([self.own, self.switch])
        return self.own.copy()


def as_prices(config: MarketConfig, P) -> tuple[np.ndarray, np.ndarray]:
    """Split a price argument into (own, switch) arrays.

    Accepts a :class:`PriceProfile`, a length-n vector (same price to all
    consumers) or an (n, 2) array of (own, switch) pairs.
    """
    if isinstance(P, PriceProfile):
        po, ps = P.own, P.switch
    else:
        arr = np.asarray(P, dtype=float)
        if arr.ndim == 2 and arr.shape[1] == 2:
            po, ps = arr[:, 0], arr[:, 1]
        elif arr.ndim == 1:
            po = ps = arr
        else:
            raise ValueError(f"cannot interpret prices of shape {arr.shape}")
    if po.size != config.n:
        raise ValueError(f"expected {config.n} prices, got {po.size}")
    return np.array(po, dtype=float), np.array(ps, dtype=float)


# ----------------------------------------------------------------------------
# scenario files
# ----------------------------------------------------------------------------

SCENARIO_FIELDS = {
    "id", "firms", "mu", "costs", "s", "distributions", "pricing_mode", "exit_allowed",
    "solver", "prices", "regions", "seed", "mc_samples", "start",
}
SOLVER_FIELDS = {"damping", "tol", "max_iter", "delta_s", "grid_points"}


@dataclass
class Scenario:
    id: str
    firms: list            # firm counts; more than one entry is an n-sweep
    s_values: list         # more than one entry is an s-sweep
    mu: object
    costs: object
    distributions: list
    pricing_mode: str = "uniform"
    exit_allowed: bool = True
    solver: dict = field(default_factory=dict)
    prices: object = None
    regions: object = None
    seed: int = 0
    mc_samples: int = 1_000_000
    start: object = None

    def config(self, n=None, s=None) -> MarketConfig:
        """Materialise the config at one sweep point, broadcasting shorthand."""
        n = self.firms[0] if n is None else n
        s = self.s_values[0] if s is None else s
        if isinstance(self.mu, str):
            if self.mu != "symmetric":
                raise ValidationError([f"mu must be a list or \"symmetric\", got {self.mu!r}"])
            mu = (1.0 / n,) * n
        else:
            mu = tuple(self.mu)
        costs = self.costs
        c = tuple(costs) if isinstance(costs, (list, tuple)) else (float(costs),) * n
        dl = self.distributions
        dists = tuple(dl) if len(dl) != 1 else (dl[0],) * n
        return MarketConfig(n, mu, c, s, dists, self.pricing_mode, self.exit_allowed)

    def configs(self):
        """Every (n, s) sweep point, n-major."""
        return [self.config(n, s) for n in self.firms for s in self.s_values]

    @property
    def sweep_variable(self):
        if len(self.firms) > 1:
            return "n"
        if len(self.s_values) > 1:
            return "s"
        return None


def _s_values(raw, errs):
    if isinstance(raw, bool):
        errs.append("s must be a number, list or {from, to, steps}")
        return [float("nan")]
    if isinstance(raw, (int, float)):
        return [float(raw)]
    if isinstance(raw, list) and raw and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw):
        return [float(x) for x in raw]
    if isinstance(raw, dict) and set(raw) == {"from", "to", "steps"}:
        lo, hi, steps = raw["from"], raw["to"], raw["steps"]
        if not (isinstance(steps, int) and steps >= 2):
            errs.append("s sweep needs integer steps >= 2")
            return [float("nan")]
        if not lo < hi:
            errs.append("s sweep needs from < to")
            return [float("nan")]
        # round so that e.g. 0.05 + 3 * 0.05 prints as 0.2
        return [round(float(x), 12) for x in np.linspace(lo, hi, steps)]
    errs.append("s must be a number, list or {from, to, steps}")
    return [float("nan")]


def scenario_from_dict(d: dict, default_id="scenario") -> Scenario:
    errs = []
    if not isinstance(d, dict):
        raise ValidationError(["scenario must be a JSON object"])
    unknown = sorted(set(d) - SCENARIO_FIELDS)
    if unknown:
        errs.append(f"unknown scenario fields: {unknown}")
    for req in ("firms", "s", "distributions"):
        if req not in d:
            errs.append(f"missing required field {req!r}")
    if errs:
        raise ValidationError(errs)

    firms = d["firms"]
    firms = firms if isinstance(firms, list) else [firms]
    if not firms or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 2 for x in firms):
        errs.append("firms must be an integer >= 2 or a list of such integers")
    s_values = _s_values(d["s"], errs)

    dl = d["distributions"]
    dl = dl if isinstance(dl, list) else [dl]
    dists = []
    for k, entry in enumerate(dl):
        try:
            dists.append(make_distribution(entry))
        except (ValueError, KeyError, TypeError) as exc:
            errs.append(f"distributions[{k}]: {exc}")
    solver = d.get("solver", {}) or {}
    if not isinstance(solver, dict):
        errs.append("solver must be an object")
        solver = {}
    bad = sorted(set(solver) - SOLVER_FIELDS)
    if bad:
        errs.append(f"unknown solver fields: {bad}")
    mu = d.get("mu", "symmetric")
    costs = d.get("costs", 0.0)
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errs.append("seed must be a nonnegative integer")
    mc = d.get("mc_samples", 1_000_000)
    if not isinstance(mc, int) or isinstance(mc, bool) or mc < 1:
        errs.append("mc_samples must be a positive integer")
    if errs:
        raise ValidationError(errs)

    sc = Scenario(
        id=str(d.get("id", default_id)),
        firms=list(firms),
        s_values=s_values,
        mu=mu,
        costs=costs,
        distributions=dists,
        pricing_mode=d.get("pricing_mode", "uniform"),
        exit_allowed=d.get("exit_allowed", True),
        solver=dict(solver),
        prices=d.get("prices"),
        regions=d.get("regions"),
        seed=seed,
        mc_samples=mc,
        start=d.get("start"),
    )
    # validate every sweep point up front so errors surface before any solve
    all_errs = []
    for n in sc.firms:
        for s in sc.s_values:
            try:
                cfg = sc.config(n, s)
            except ValidationError as exc:
                all_errs.extend(exc.errors)
                continue
            except (TypeError, ValueError) as exc:
                all_errs.append(str(exc))
                continue
            for e in config_errors(cfg):
                if e not in all_errs:
                    all_errs.append(e)
    if all_errs:
        raise ValidationError(all_errs)
    return sc


def loads_scenario(text: str, default_id="scenario") -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}\n  {context}") from None
    return scenario_from_dict(raw, default_id)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return loads_scenario(text, default_id=path.stem)


def dumps_config(config: MarketConfig, **extra) -> str:
    d = config.to_dict()
    d.update(extra)
    return json.dumps(d, indent=2, sort_keys=False)


def config_from_dict(d: dict) -> MarketConfig:
    """Inverse of :meth:`MarketConfig.to_dict`. Does not validate."""
    return MarketConfig(d["firms"], d["mu"], d["costs"], d["s"], d["distributions"],
                        d.get("pricing_mode", "uniform"), d.get("exit_allowed", True))
