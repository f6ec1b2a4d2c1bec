"""Exact brute-force evaluation of the averaged subset sums, and the identity suite.

The brute-force side never uses the gap decomposition: ``sigma(S, Y)`` is
counted pair by pair and every configuration ``Y`` is enumerated.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Sequence

from . import kernel
from .errors import DomainError, ResourceError
from .kernel import GeneralRhoProfile, RhoProfile, XiVector, phi
from .scalars import ModelParams, SiteSet

#: enumeration caps
MAX_Y_HORIZON = 20
MAX_DOUBLE_SUM_HORIZON = 14
MAX_DOUBLE_SUM_K = 4

XI_CHOICES = (Fraction(3, 2), Fraction(2), Fraction(5, 2), Fraction(3), Fraction(7, 2))
TAU_CHOICES = (Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3))
RHO_CHOICES = (Fraction(0), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2),
               Fraction(2, 3), Fraction(3, 4), Fraction(1))

IDENTITIES = ("y_average", "n_stability", "double_sum", "uniform", "period_doubling",
              "indicator", "step", "lattice")


def _pair_count(S_mask: int, Y_mask: int, S: Sequence[int]) -> int:
    # number of (u, v) with u in S, v in Y, u >= v: bits of Y at or below each u
    return sum((Y_mask & ((2 << u) - 1)).bit_count() for u in S)


def brute_y_average(S: SiteSet, N: int, rho, params: ModelParams) -> Fraction:
    """Average of ``tau^{sigma(S, Y)}`` over every ``Y`` with ``S <= Y <= [1, N]``."""
    S = SiteSet(S)
    if N > MAX_Y_HORIZON:
        raise ResourceError(f"horizon {N} exceeds enumeration cap {MAX_Y_HORIZON}")
    if S and S[-1] > N:
        raise DomainError(f"S must lie in [1, {N}]")
    tau = Fraction(params.tau)
    rhos = [Fraction(rho.at(n)) for n in range(1, N + 1)]
    D = math.lcm(*(r.denominator for r in rhos)) if rhos else 1
    occ = [int(r * D) for r in rhos]
    empty = [D - c for c in occ]
    S_mask = sum(1 << s for s in S)
    base = 1
    for s in S:
        base *= occ[s - 1]
    free = [n for n in range(1, N + 1) if not (S_mask >> n) & 1]
    # tau = a / b; bring every tau^sigma over the common denominator b^(k*N)
    a, b = tau.numerator, tau.denominator
    top = len(S) * N
    total = 0
    for bits in range(1 << len(free)):
        Y_mask = S_mask
        weight = base
        for j, n in enumerate(free):
            if (bits >> j) & 1:
                Y_mask |= 1 << n
                weight *= occ[n - 1]
            else:
                weight *= empty[n - 1]
        if weight == 0:
            continue
        sigma = _pair_count(S_mask, Y_mask, S)
        total += weight * a ** sigma * b ** (top - sigma)
    return Fraction(total, D ** N * b ** top)


def lucky_formula(S: SiteSet, rho, params: ModelParams, phi_fn: Callable = phi):
    """``tau^{k(k+1)/2} prod_{n in S} rho_n prod_i prod_{s_{i-1} < n < s_i} phi(i, n)``."""
    S = SiteSet(S)
    k = len(S)
    if k == 0:
        raise DomainError("lucky_formula needs a non-empty S")
    out = params.tau ** (k * (k + 1) // 2)
    for s in S:
        out *= rho.at(s)
    prev = 0
    for i, s in enumerate(S, start=1):
        for n in range(prev + 1, s):
            out *= phi_fn(i, n, k, rho, params)
        prev = s
    return out


def brute_double_sum(k: int, N: int, rho, xi: XiVector, params: ModelParams):
    """``sum over |S| = k within [1, N]`` of ``brute_y_average(S, N) * prod xi_i^{-s_i}``."""
    if N > MAX_DOUBLE_SUM_HORIZON or k > MAX_DOUBLE_SUM_K:
        raise ResourceError(f"double sum with k={k}, N={N} exceeds enumeration caps")
    if len(xi) != k:
        raise DomainError(f"expected {k} variables, got {len(xi)}")
    total = Fraction(0)
    for S in itertools.combinations(range(1, N + 1), k):
        avg = brute_y_average(SiteSet(S), N, rho, params)
        if avg == 0:
            continue
        mono = Fraction(1)
        for x, s in zip(xi, S):
            mono /= x ** s
        total += avg * mono
    return total


@dataclass
class IdentityReport:
    identity: str
    instance: dict
    left: str
    right: str
    equal: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _strs(values):
    return [str(v) for v in values]


def _report(name, instance, left, right):
    return IdentityReport(name, instance, str(left), str(right), left == right)


def _random_instance(rng: random.Random, k_max, m_max, n_max):
    tau = rng.choice(TAU_CHOICES)
    params = ModelParams(tau / (1 + tau), 1 / (1 + tau))
    k = rng.randint(1, k_max)
    m = rng.randint(1, m_max)
    xi = XiVector(rng.choice((1, -1)) * rng.choice(XI_CHOICES) for _ in range(k))
    periodic = [rng.choice(RHO_CHOICES) for _ in range(m)]
    if not any(periodic):
        periodic[rng.randrange(m)] = rng.choice(RHO_CHOICES[1:])
    general = [rng.choice(RHO_CHOICES) for _ in range(n_max)]
    return params, k, m, xi, RhoProfile(periodic), general


def run_identity_suite(seed: int = 0, trials: int = 100, k_max: int = 4, m_max: int = 4,
                       n_max: int = 12, phi_fn: Callable = phi) -> list[IdentityReport]:
    """Check every exact identity on ``trials`` random instances.

    Each trial draws its own sub-seed from ``(seed, trial)``, so trials are
    independent of one another.  ``phi_fn`` replaces the gap factor in the
    closed-form side of the Y-average identity; it exists so tests can inject
    a fault.
    """
    reports = []
    for trial in range(trials):
        rng = random.Random(f"{seed}:{trial}")
        params, k, m, xi, profile, general_values = _random_instance(rng, k_max, m_max, n_max)
        base = {"trial": trial, "k": k, "m": m, "p": str(params.p), "q": str(params.q),
                "tau": str(params.tau), "xi": _strs(xi.xi), "rho": _strs(profile.values)}

        # Y-average against its closed form, and independence of the horizon
        N = rng.randint(k, n_max)
        general = GeneralRhoProfile(general_values[:N])
        S = SiteSet(sorted(rng.sample(range(1, N + 1), k)))
        inst = dict(base, N=N, S=list(S), rho_general=_strs(general.values))
        left = brute_y_average(S, N, general, params)
        reports.append(_report("y_average", inst, left, lucky_formula(S, general, params, phi_fn)))
        reports.append(_report("n_stability", inst, brute_y_average(S, S[-1], general, params), left))

        # subset sum of the averages against the B-matrix product at the same horizon
        Nd = rng.randint(k, min(n_max, MAX_DOUBLE_SUM_HORIZON))
        general_d = GeneralRhoProfile(general_values[:Nd])
        inst = dict(base, N=Nd, rho_general=_strs(general_d.values))
        left = brute_double_sum(k, Nd, general_d, xi, params)
        right = params.tau ** (k * (k + 1) // 2) * kernel.general_factor_truncated(k, xi, general_d, params)
        reports.append(_report("double_sum", inst, left, right))

        # reductions of the periodic transfer-matrix product
        r = profile.values[0] if profile.values[0] else Fraction(1, 2)
        reports.append(_report("uniform", dict(base, rho_uniform=str(r)),
                               kernel.periodic_factor(k, xi, RhoProfile([r] * m), params),
                               kernel.bernoulli_factor(k, xi, r, params)))
        reports.append(_report("period_doubling", base,
                               kernel.periodic_factor(k, xi, profile, params),
                               kernel.periodic_factor(k, xi, profile.repeated(2), params)))
        nu = rng.randrange(m)
        reports.append(_report("indicator", dict(base, nu=nu, rho_uniform=str(r)),
                               kernel.periodic_factor(k, xi, RhoProfile.one_hot(m, nu, r), params),
                               kernel.indicator_factor(k, xi, m, nu, r, params)))
        reports.append(_report("step", base,
                               kernel.periodic_factor(k, xi, RhoProfile([Fraction(1)] * m), params),
                               kernel.step_factor(k, xi, params)))
        reports.append(_report("lattice", base,
                               kernel.periodic_factor(k, xi, RhoProfile.one_hot(m, 0, Fraction(1)), params),
                               kernel.lattice_factor(k, xi, m, params)))
    return reports
