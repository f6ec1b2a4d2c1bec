"""Analytic ingredients of the probability formula.

``epsilon``, ``f_factor`` and ``integrand_I`` build the contour integrand.
The ``*_factor`` functions give, for a fixed tuple of integration variables,
the averaged sum over particle subsets of size ``k``.  None of them includes
the ``tau^{k(k+1)/2}`` prefactor; that lives in
:func:`periodic_asep.scalars.combined_prefactor`.

All functions are generic in the scalar type: pass Fractions for exact
evaluation, complex numbers (or numpy complex arrays, for the vectorised
helpers) for numerics.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, PoleError
from .scalars import ModelParams, ScalarField, SiteSet, sigma_count, to_fraction


def _check_probability(value, what):
    if isinstance(value, complex):
        if value.imag != 0:
            raise DomainError(f"{what} must be real, got {value}")
        value = value.real
    if not 0 <= value <= 1:
        raise DomainError(f"{what} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class RhoProfile:
    """m-periodic occupation probabilities; ``values[r]`` is the density on sites ``n = r mod m``."""

    values: tuple

    def __init__(self, values: Sequence):
        values = tuple(values)
        if not values:
            raise DomainError("a periodic profile needs at least one value")
        for v in values:
            _check_probability(v, "rho")
        if not any(v != 0 for v in values):
            raise DomainError("profile is identically zero: no particles")
        object.__setattr__(self, "values", values)

    @classmethod
    def parse(cls, values: Sequence) -> "RhoProfile":
        return cls(to_fraction(v) for v in values)

    @classmethod
    def one_hot(cls, m: int, nu: int, rho=1) -> "RhoProfile":
        values = [0] * m
        values[nu % m] = rho
        return cls(values)

    @property
    def m(self) -> int:
        return len(self.values)

    def at(self, n: int):
        return self.values[n % len(self.values)]

    def repeated(self, times: int) -> "RhoProfile":
        return RhoProfile(self.values * times)

    def truncated(self, N: int) -> "GeneralRhoProfile":
        """The same densities on sites ``1..N`` and zero beyond."""
        return GeneralRhoProfile([self.at(n) for n in range(1, N + 1)])

    def in_field(self, field: ScalarField) -> "RhoProfile":
        return RhoProfile(field(v) for v in self.values)


@dataclass(frozen=True)
class GeneralRhoProfile:
    """Arbitrary densities on sites ``1..N``; zero beyond the horizon."""

    values: tuple

    def __init__(self, values: Sequence):
        values = tuple(values)
        for v in values:
            _check_probability(v, "rho")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_sites(cls, sites: Sequence[int], N: int | None = None) -> "GeneralRhoProfile":
        """0/1 profile of a deterministic configuration."""
        sites = set(sites)
        N = max(sites) if N is None else N
        return cls([Fraction(1) if n in sites else Fraction(0) for n in range(1, N + 1)])

    @property
    def N(self) -> int:
        return len(self.values)

    def at(self, n: int):
        if 1 <= n <= len(self.values):
            return self.values[n - 1]
        return 0

    def in_field(self, field: ScalarField) -> "GeneralRhoProfile":
        return GeneralRhoProfile(field(v) for v in self.values)


class XiVector:
    """Integration variables ``xi_1..xi_k`` with cached suffix products."""

    def __init__(self, xi: Sequence):
        self.xi = tuple(xi)

    @property
    def k(self) -> int:
        return len(self.xi)

    def __len__(self):
        return len(self.xi)

    def __getitem__(self, i):
        return self.xi[i]

    def x(self, i: int):
        """1-based access ``xi_i``."""
        return self.xi[i - 1]

    @cached_property
    def _suffix(self) -> tuple:
        out = [self.xi[0] ** 0 if self.xi else 1]
        for v in reversed(self.xi):
            out.append(v * out[-1])
        return tuple(reversed(out))

    def suffix(self, i: int):
        """``Pi_i = xi_i * xi_{i+1} * ... * xi_k``; ``Pi_{k+1} = 1``."""
        if not 1 <= i <= self.k + 1:
            raise DomainError(f"suffix index {i} outside 1..{self.k + 1}")
        return self._suffix[i - 1]


def epsilon(xi, params: ModelParams):
    if xi == 0:
        raise DomainError("epsilon(xi) needs xi != 0")
    return params.p / xi + params.q * xi - 1


def f_factor(xi_i, xi_j, params: ModelParams):
    den = params.p + params.q * xi_i * xi_j - xi_i
    if den == 0:
        raise PoleError(f"f({xi_i}, {xi_j}) has a vanishing denominator")
    return (xi_j - xi_i) / den


def integrand_I(x: int, k: int, xi: XiVector, t, params: ModelParams):
    """``prod_{i<j} f(xi_i, xi_j) * prod_i xi_i^x e^{eps(xi_i) t} / (1 - xi_i)``."""
    if len(xi) != k:
        raise DomainError(f"expected {k} variables, got {len(xi)}")
    exact = any(isinstance(v, Fraction) for v in xi)
    if exact and t != 0:
        raise DomainError("exact evaluation of I requires t = 0")
    out = xi[0] ** 0 if k else 1
    for i in range(k):
        v = xi[i]
        if v == 0 or v == 1:
            raise DomainError(f"xi_{i + 1} = {v} is a singular point of I")
        for j in range(i + 1, k):
            out *= f_factor(v, xi[j], params)
        term = v ** x / (1 - v)
        if t != 0:
            term *= cmath.exp(epsilon(v, params) * t)
        out *= term
    return out


def phi(i: int, n: int, k: int, rho, params: ModelParams):
    """``1 - rho_n + rho_n tau^{k-i+1}``; ``rho`` is any profile with ``at(n)``."""
    if not 1 <= i <= k:
        raise DomainError(f"need 1 <= i <= k, got i={i}, k={k}")
    r = rho.at(n)
    return 1 - r + r * params.tau ** (k - i + 1)


def _phi_range(i, lo, hi, k, rho, params, phi_fn=phi):
    out = 1
    for n in range(lo, hi + 1):
        out = out * phi_fn(i, n, k, rho, params)
    return out


def a_entries(i: int, k: int, xi_i, suffix_i, rho: RhoProfile, params: ModelParams):
    """Entries of the periodic transfer matrix ``A_i`` as an m x m nested list.

    ``xi_i`` and ``suffix_i`` (``= xi_i ... xi_k``) may be scalars or numpy
    arrays of matching shape; the returned entries follow suit.
    """
    m = rho.m
    period = _phi_range(i, 1, m, k, rho, params)
    big = suffix_i ** m
    den = big - period
    if np.any(den == 0):
        raise PoleError(f"A_{i}: (xi_i...xi_k)^m equals the product of phi")
    inv = 1 / den
    rows = []
    for mu in range(m):
        row = []
        for nu in range(m):
            r = rho.at(nu)
            if mu < nu:
                e = big * xi_i ** (-nu) * (r * _phi_range(i, mu + 1, nu - 1, k, rho, params)) * inv
            else:
                e = xi_i ** (-nu) * (r * _phi_range(i, mu + 1, nu + m - 1, k, rho, params)) * inv
            row.append(e)
        rows.append(row)
    return rows


def build_A(i: int, k: int, xi: XiVector, rho: RhoProfile, params: ModelParams) -> np.ndarray:
    """The m x m transfer matrix ``A_i`` (object array)."""
    entries = a_entries(i, k, xi.x(i), xi.suffix(i), rho, params)
    return np.array(entries, dtype=object)


def b_entries(i: int, k: int, xi_i, rho: GeneralRhoProfile, params: ModelParams):
    """Strictly upper triangular ``(N+1) x (N+1)`` truncation of ``B_i`` (nested list)."""
    N = rho.N
    zero = xi_i * 0
    phis = [phi(i, n, k, rho, params) for n in range(1, N + 1)]
    rows = [[zero] * (N + 1) for _ in range(N + 1)]
    for nu in range(1, N + 1):
        r = rho.at(nu)
        if r == 0:
            continue
        col = xi_i ** (-nu) * r
        # walk mu downward, extending the phi product one site at a time
        for mu in range(nu - 1, -1, -1):
            rows[mu][nu] = col
            if mu >= 1:
                col = col * phis[mu - 1]
    return rows


def build_B_truncated(i: int, k: int, xi: XiVector, rho: GeneralRhoProfile,
                      params: ModelParams) -> np.ndarray:
    if not 1 <= i <= k:
        raise DomainError(f"need 1 <= i <= k, got i={i}, k={k}")
    return np.array(b_entries(i, k, xi.x(i), rho, params), dtype=object)


def _top_row_sum(matrices) -> object:
    """``(1 0 ... 0) M_1 ... M_k (1 ... 1)^T`` evaluated right to left."""
    v = None
    for mat in reversed(matrices):
        v = mat.sum(axis=1) if v is None else mat.dot(v)
    return v[0]


def periodic_factor(k: int, xi: XiVector, rho: RhoProfile, params: ModelParams):
    """Top-row sum of ``A_1 A_2 ... A_k``."""
    if k == 0:
        return 1
    return _top_row_sum([build_A(i, k, xi, rho, params) for i in range(1, k + 1)])


def general_factor_truncated(k: int, xi: XiVector, rho: GeneralRhoProfile, params: ModelParams):
    """Top-row sum of ``B_1 ... B_k`` truncated at the profile horizon (exact for that horizon)."""
    if k == 0:
        return 1
    if k > rho.N:
        return xi[0] * 0
    v = None
    for i in range(k, 0, -1):
        rows = b_entries(i, k, xi.x(i), rho, params)
        if v is None:
            v = [sum(row[1:], rows[0][0]) for row in rows]
        else:
            v = [sum((a * b for a, b in zip(row, v)), rows[0][0]) for row in rows]
    return v[0]


def _check_den(den, what):
    if den == 0:
        raise PoleError(f"{what}: vanishing denominator")
    return den


def step_factor(k: int, xi: XiVector, params: ModelParams):
    """``prod_i 1 / (xi_i...xi_k - tau^{k-i+1})`` (Y = positive integers)."""
    out = 1
    for i in range(1, k + 1):
        out = out / _check_den(xi.suffix(i) - params.tau ** (k - i + 1), "step factor")
    return out


def bernoulli_factor(k: int, xi: XiVector, rho, params: ModelParams):
    """``prod_i rho / (xi_i...xi_k - 1 + rho - tau^{k-i+1} rho)`` (uniform density)."""
    out = 1
    for i in range(1, k + 1):
        den = xi.suffix(i) - 1 + rho - params.tau ** (k - i + 1) * rho
        out = out * rho / _check_den(den, "Bernoulli factor")
    return out


def lattice_factor(k: int, xi: XiVector, m: int, params: ModelParams):
    """``prod_i 1 / ((xi_i...xi_k)^m - tau^{k-i+1})`` (Y = m * positive integers)."""
    out = 1
    for i in range(1, k + 1):
        den = xi.suffix(i) ** m - params.tau ** (k - i + 1)
        out = out / _check_den(den, "lattice factor")
    return out


def indicator_factor(k: int, xi: XiVector, m: int, nu: int, rho, params: ModelParams):
    """Closed form for density ``rho`` on one residue class ``nu`` and zero elsewhere.

    ``nu`` is reduced mod m, so ``nu = 0`` and ``nu = m`` name the same class.
    """
    if not 0 <= nu <= m:
        raise DomainError(f"need 0 <= nu <= m, got nu={nu}, m={m}")
    out = xi.suffix(1) ** ((-nu) % m)
    for i in range(1, k + 1):
        den = xi.suffix(i) ** m - (1 - rho + rho * params.tau ** (k - i + 1))
        out = out * rho / _check_den(den, "indicator factor")
    return out


def deterministic_factor(k: int, xi: XiVector, S: SiteSet, Y: SiteSet, params: ModelParams):
    """``tau^{sigma(S,Y) - k(k+1)/2} prod_i xi_i^{-s_i}`` for a fixed pair ``S`` within ``Y``."""
    if len(S) != k:
        raise DomainError(f"|S| = {len(S)} but k = {k}")
    if not S.issubset(Y):
        raise DomainError("S must be a subset of Y")
    out = params.tau ** (sigma_count(S, Y) - k * (k + 1) // 2)
    for i in range(1, k + 1):
        out = out * xi.x(i) ** (-S.s(i))
    return out


def deterministic_chain_factor(k: int, xi: XiVector, Y: SiteSet, params: ModelParams):
    """Sum of :func:`deterministic_factor` over every ``S`` within ``Y`` of size ``k``.

    Uses ``sigma(S, Y) = sum_i rank_Y(s_i)``, which turns the subset sum into a
    chain over increasing ranks.
    """
    ys = list(Y)
    tau = params.tau
    if k > len(ys):
        return xi[0] * 0 if k else 1
    # acc[r] = sum over chains s_i < ... < s_k with s_i = ys[r]
    acc = None
    for i in range(k, 0, -1):
        x = xi.x(i)
        new = []
        tail = 0
        for r in range(len(ys) - 1, -1, -1):
            weight = tau ** (r + 1 - i) * x ** (-ys[r]) if r + 1 >= i else 0
            new.append(weight * (1 if acc is None else tail))
            if acc is not None:
                tail = tail + acc[r]
        new.reverse()
        acc = new
    return sum(acc[1:], acc[0])
