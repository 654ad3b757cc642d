"""Monte Carlo ground truth: simulate consumers one by one and count choices."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .market import MarketConfig, as_prices

EXIT = -1
BLOCK = 1 << 16  # consumers per RNG stream; fixes the sharding, not the thread count


def consumer_choice(v, P, s, initial_firm, exit_allowed=True, p_switch=None):
    """Decision of one consumer: -1 for exit, otherwise the firm index bought from.

    ``P`` holds the prices the consumer pays at her initial firm; rivals
    charge ``p_switch`` (defaults to ``P``). Ties go to buying over exiting,
    to the initial firm over rivals and to lower indices over higher ones.
    """
    v = np.asarray(v, dtype=float)
    po = np.asarray(P, dtype=float)
    ps = po if p_switch is None else np.asarray(p_switch, dtype=float)
    k = int(initial_firm)
    best, best_u = k, v[k] - po[k]
    for j in range(v.size):
        if j == k:
            continue
        u = v[j] - ps[j] - s
        if u > best_u:
            best, best_u = j, u
    if exit_allowed and best_u < 0.0:
        return EXIT
    return best


@dataclass
class ConsumerDraw:
    v: np.ndarray          # (N, n) valuations
    initial_firm: np.ndarray  # (N,) firm indices


@dataclass
class FirmDemand:
    initial_mass: float
    switch_in_mass: float

    @property
    def total(self):
        return self.initial_mass + self.switch_in_mass


@dataclass
class DemandBreakdown:
    """Per-firm demand split plus market exit.

    Standard-error arrays are filled by the Monte Carlo route only.
    """

    initial_mass: np.ndarray
    switch_in_mass: np.ndarray
    exit_mass: float
    initial_se: np.ndarray = None
    switch_in_se: np.ndarray = None
    total_se: np.ndarray = None
    exit_se: float = None
    samples: int = None

    @property
    def total_mass(self):
        return self.initial_mass + self.switch_in_mass

    @property
    def n(self):
        return self.initial_mass.size

    def firm(self, i) -> FirmDemand:
        return FirmDemand(float(self.initial_mass[i]), float(self.switch_in_mass[i]))


def draw_consumers(config: MarketConfig, N: int, seed: int, block: int = 0) -> ConsumerDraw:
    """Draw ``N`` consumers from the stream keyed by (seed, block)."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))
    u_init = rng.random(N)
    U = rng.random((N, config.n))
    cum = np.cumsum(config.mu)
    cum[-1] = 1.0
    init = np.minimum(np.searchsorted(cum, u_init, side="right"), config.n - 1).astype(np.int64)
    V = np.empty((N, config.n))
    for j, d in enumerate(config.dists):
        V[:, j] = K.np_ppf(d.code, d.kernel_params, U[:, j])
    return ConsumerDraw(V, init)


def _count_block(config, po, ps, seed, b, size):
    draw = draw_consumers(config, size, seed, b)
    return K.choice_counts(draw.v, draw.initial_firm, po, ps, config.s, bool(config.exit_allowed))


def choice_counts(config: MarketConfig, P, N: int, seed: int, jobs: int = 1) -> np.ndarray:
    """Integer counts[k, 0] = exits from firm k, counts[k, j + 1] = purchases at j."""
    if N < 1:
        raise ValueError("N must be at least 1")
    po, ps = as_prices(config, P)
    sizes = [BLOCK] * (N // BLOCK) + ([N % BLOCK] if N % BLOCK else [])
    tasks = [(b, sz) for b, sz in enumerate(sizes)]
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(lambda t: _count_block(config, po, ps, seed, *t), tasks))
    else:
        parts = [_count_block(config, po, ps, seed, *t) for t in tasks]
    # integer sums are exact, so the result does not depend on job count
    return np.sum(parts, axis=0)


def _se(p, N):
    return np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / N)


def mc_demand(config: MarketConfig, P, N: int = 1_000_000, seed: int = 0, jobs: int = 1) -> DemandBreakdown:
    """Empirical demand breakdown over ``N`` simulated consumers."""
    counts = choice_counts(config, P, N, seed, jobs)
    buys = counts[:, 1:]
    initial = np.diag(buys).astype(float) / N
    switch_in = (buys.sum(axis=0) - np.diag(buys)).astype(float) / N
    exit_mass = float(counts[:, 0].sum()) / N
    return DemandBreakdown(
        initial_mass=initial,
        switch_in_mass=switch_in,
        exit_mass=exit_mass,
        initial_se=_se(initial, N),
        switch_in_se=_se(switch_in, N),
        total_se=_se(initial + switch_in, N),
        exit_se=float(_se(exit_mass, N)),
        samples=N,
    )
