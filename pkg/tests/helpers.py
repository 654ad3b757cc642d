import numpy as np

from switchcost.distributions import ValuationDistribution as D
from switchcost.market import MarketConfig

FAMILY_POOL = [
    D("uniform"),
    D("triangular-increasing"),
    D("trapezoidal", (4.0,)),
    D("truncated-exponential", (1.3,)),
    D("truncated-normal", (0.5, 0.25)),
    D("truncated-pareto", (1.5, -0.4)),
    D("piecewise-linear", (0.3, 1.4, 0.8, 1.0)),
]


def random_config(rng, ns=(2, 3, 4)):
    """A random valid market plus an interior price vector and a firm index."""
    n = int(rng.choice(ns))
    cfg = MarketConfig(
        n,
        rng.dirichlet(np.ones(n)),
        rng.uniform(0.0, 0.3, n),
        float(rng.uniform(0.02, 0.5)),
        [FAMILY_POOL[k] for k in rng.integers(0, len(FAMILY_POOL), n)],
        exit_allowed=bool(rng.integers(0, 2)),
    )
    P = rng.uniform(0.2, 0.8, n)
    return cfg, P, int(rng.integers(0, n))


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)
