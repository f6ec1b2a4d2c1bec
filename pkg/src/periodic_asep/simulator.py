"""Continuous-time Monte Carlo for ASEP started from (periodic) step Bernoulli data.

Random streams: each trial uses ``numpy.random.Generator(PCG64)`` seeded by
``SeedSequence(seed, spawn_key=(trial,))``.  Trials therefore do not depend
on each other or on execution order, and per-trial results are reproducible
across releases that keep this contract.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, ResourceError
from .kernel import GeneralRhoProfile, RhoProfile
from .scalars import ModelParams, SiteSet

log = logging.getLogger(__name__)

Profile = Union[RhoProfile, GeneralRhoProfile, SiteSet]

MAX_RESAMPLES = 20


def _profile_density(profile: Profile, L: int) -> np.ndarray:
    if isinstance(profile, SiteSet):
        dens = np.zeros(L)
        for s in profile:
            if s <= L:
                dens[s - 1] = 1.0
        return dens
    return np.array([float(profile.at(n)) for n in range(1, L + 1)])


def sample_initial(profile: Profile, L: int, rng: np.random.Generator, l_min: int = 0) -> SiteSet:
    """Occupy each site ``1..L`` independently with probability ``rho(n)``.

    If fewer than ``l_min`` particles land, ``L`` is doubled and the draw is
    repeated, up to :data:`MAX_RESAMPLES` times.
    """
    for _ in range(MAX_RESAMPLES):
        dens = _profile_density(profile, L)
        sites = np.flatnonzero(rng.random(L) < dens) + 1
        if len(sites) >= l_min:
            return SiteSet(sites.tolist())
        if isinstance(profile, SiteSet) or (isinstance(profile, GeneralRhoProfile) and L >= profile.N):
            break
        L *= 2
    raise ResourceError(f"could not place {l_min} particles (last horizon L={L})")


def evolve(initial: Sequence[int], t: float, p: float, rng: np.random.Generator) -> tuple:
    """Run the exclusion dynamics for time ``t``; returns sorted positions on Z.

    Each particle carries a rate-1 clock.  The particle count is conserved, so
    the superposed clock rings ``Poisson(n t)`` times in ``[0, t]``; each ring
    picks a uniform particle, which tries to step right with probability
    ``p`` and left otherwise, and stays put if the target is occupied.
    Particles never pass each other, so list order is particle order.
    """
    pos = list(initial)
    n = len(pos)
    if n == 0 or t <= 0:
        return tuple(pos)
    events = rng.poisson(n * t)
    picks = rng.integers(n, size=events).tolist()
    rights = (rng.random(events) < p).tolist()
    last = n - 1
    for i, right in zip(picks, rights):
        x = pos[i]
        if right:
            if i == last or pos[i + 1] != x + 1:
                pos[i] = x + 1
        elif i == 0 or pos[i - 1] != x - 1:
            pos[i] = x - 1
    return tuple(pos)


@dataclass
class SimConfig:
    """Monte Carlo run description.  ``p`` may be any value in [0, 1]."""

    p: float
    t: float
    profile: Profile
    trials: int
    seed: int = 0
    l_max: int = 1
    x_window: tuple = (-10, 10)
    L: int | None = None

    def __post_init__(self):
        if isinstance(self.p, ModelParams):
            self.p = self.p.p
        if not 0 <= self.p <= 1:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if self.l_max < 1:
            raise DomainError("l_max must be >= 1")
        lo, hi = self.x_window
        if lo > hi:
            raise DomainError(f"empty x window {self.x_window}")
        self.x_window = (int(lo), int(hi))
        if self.L is None:
            self.L = self.default_horizon()
        expected = float(_profile_density(self.profile, self.L).sum())
        buffer = 10 + math.ceil(3 * self.t)
        if expected < self.l_max + buffer:
            log.warning("horizon L=%d holds %.1f particles on average; fewer than l_max + %d",
                        self.L, expected, buffer)

    @property
    def q(self):
        return 1 - self.p

    def default_horizon(self) -> int:
        if isinstance(self.profile, SiteSet):
            return self.profile[-1] if len(self.profile) else 1
        if isinstance(self.profile, GeneralRhoProfile):
            return self.profile.N
        L = max(self.x_window[1], 0) + self.l_max * self.profile.m + math.ceil(5 * self.t) + 20
        # grow by whole periods until the expected particle count covers l_max plus the buffer
        need = self.l_max + 10 + math.ceil(3 * self.t)
        per_period = float(sum(self.profile.values))
        deficit = need - float(_profile_density(self.profile, L).sum())
        if deficit > 0:
            L += self.profile.m * math.ceil(deficit / per_period)
        return L

    def with_horizon(self, L: int) -> "SimConfig":
        return SimConfig(self.p, self.t, self.profile, self.trials, self.seed,
                         self.l_max, self.x_window, L)


@dataclass
class EmpiricalCdf:
    """Hit counts ``#{trials : x_l(t) <= x}`` on an ``l x x`` grid."""

    ls: list
    xs: list
    hits: np.ndarray
    trials: int

    @property
    def p_hat(self) -> np.ndarray:
        return self.hits / self.trials

    @property
    def stderr(self) -> np.ndarray:
        p = self.p_hat
        return np.sqrt(p * (1 - p) / self.trials)

    def lookup(self, l: int, x: int):
        a, b = self.ls.index(l), self.xs.index(x)
        return self.p_hat[a, b], self.stderr[a, b]

    def rows(self):
        p, se = self.p_hat, self.stderr
        for a, l in enumerate(self.ls):
            for b, x in enumerate(self.xs):
                yield {"l": l, "x": x, "hits": int(self.hits[a, b]), "trials": self.trials,
                       "p_hat": float(p[a, b]), "stderr": float(se[a, b])}


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _run_trials(config: SimConfig, start: int, stop: int) -> np.ndarray:
    out = np.empty((stop - start, config.l_max), dtype=np.int64)
    p = float(config.p)
    for row, trial in enumerate(range(start, stop)):
        rng = trial_rng(config.seed, trial)
        initial = sample_initial(config.profile, config.L, rng, config.l_max)
        final = evolve(initial.sites, config.t, p, rng)
        out[row] = final[:config.l_max]
    return out


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("PERIODIC_ASEP_THREADS", "1")))
    except ValueError:
        return 1


def simulate_positions(config: SimConfig, workers: int | None = None) -> np.ndarray:
    """Positions of particles ``1..l_max`` at time ``t``, one row per trial."""
    workers = _workers() if workers is None else workers
    if workers <= 1 or config.trials < 1000:
        return _run_trials(config, 0, config.trials)
    bounds = np.linspace(0, config.trials, workers + 1).astype(int)
    with ProcessPoolExecutor(workers) as pool:
        parts = pool.map(_run_trials, [config] * workers, bounds[:-1], bounds[1:])
        return np.concatenate(list(parts))


def estimate_cdf(config: SimConfig, workers: int | None = None) -> EmpiricalCdf:
    positions = simulate_positions(config, workers)
    xs = list(range(config.x_window[0], config.x_window[1] + 1))
    hits = np.empty((config.l_max, len(xs)), dtype=np.int64)
    grid = np.array(xs)
    for a in range(config.l_max):
        ordered = np.sort(positions[:, a])
        hits[a] = np.searchsorted(ordered, grid, side="right")
    return EmpiricalCdf(list(range(1, config.l_max + 1)), xs, hits, config.trials)


@dataclass
class TruncationReport:
    L: int
    L2: int
    max_delta: float
    worst: dict = field(default_factory=dict)
    flagged: bool = False


def truncation_check(config: SimConfig, workers: int | None = None) -> TruncationReport:
    """Compare estimates at horizons ``L`` and ``2L`` (same seed family).

    Flags when some ``|delta p_hat|`` exceeds three combined standard errors.
    """
    a = estimate_cdf(config, workers)
    b = estimate_cdf(config.with_horizon(2 * config.L), workers)
    delta = np.abs(a.p_hat - b.p_hat)
    combined = np.sqrt(a.stderr ** 2 + b.stderr ** 2)
    # a zero combined error with a nonzero gap is a disagreement too
    excess = delta - 3 * combined
    worst = np.unravel_index(np.argmax(excess), excess.shape)
    return TruncationReport(
        L=config.L, L2=2 * config.L, max_delta=float(delta.max()),
        worst={"l": a.ls[worst[0]], "x": a.xs[worst[1]], "delta": float(delta[worst]),
               "combined_stderr": float(combined[worst])},
        flagged=bool(np.any(excess > 0)))
