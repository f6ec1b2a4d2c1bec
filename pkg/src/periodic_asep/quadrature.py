"""Numerical evaluation of P(x_l(t) <= x) as a truncated series of contour integrals.

Term ``k`` of the series is ``combined_prefactor(l, k)`` times a k-fold
integral over circles ``|xi| = R`` of ``I(x, k, xi) * factor(xi)``, where
``factor`` is the transfer-matrix top-row sum for the initial profile.  The
integrals are done with the tensor-product trapezoid rule, which converges
geometrically for integrands analytic near the torus.

Because ``x`` enters only through ``(xi_1 ... xi_k)^x``, one pass over the
nodes serves a whole window of ``x`` values: contributions are binned by the
total angle index of the node tuple.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import kernel
from ._torus import torus_sum
from .errors import DomainError, ParameterError
from .kernel import GeneralRhoProfile, RhoProfile
from .scalars import FLOATING, ModelParams, SiteSet, combined_prefactor

log = logging.getLogger(__name__)

Profile = Union[RhoProfile, GeneralRhoProfile, SiteSet]

#: smallest per-circle node count used for high series terms
MIN_POINTS = 24
#: largest tensor grid (node tuples) the convergence check will refine by doubling
CHECK_BUDGET = 3 * 10**8


@dataclass(frozen=True)
class ContourSpec:
    """Circle ``|xi| = radius`` discretised by ``points`` equispaced nodes.

    ``shift`` rotates the nodes by that fraction of the node spacing.
    """

    radius: float
    points: int
    shift: float = 0.0

    def __post_init__(self):
        if self.points < 8:
            raise DomainError(f"need at least 8 nodes per circle, got {self.points}")
        if not self.radius > 0:
            raise DomainError(f"radius must be positive, got {self.radius}")

    def validate(self, params: ModelParams):
        """Check that every singularity of the integrand lies strictly inside the circle."""
        p, q = float(params.p), float(params.q)
        R = self.radius
        if not (R > 1 and R > p / q and q * R * R - R - p > 0):
            raise ParameterError(
                f"radius {R} too small for p={p}: need R > 1, R > tau and qR^2 - R - p > 0")


def contour_nodes(spec: ContourSpec):
    """Nodes ``R e^{2 pi i j / M}`` and weights ``xi_j / M``.

    ``sum_j w_j g(xi_j)`` approximates the contour integral of ``g`` with the
    ``1 / (2 pi i)`` normalisation.
    """
    j = np.arange(spec.points) + spec.shift
    nodes = spec.radius * np.exp(2j * np.pi * j / spec.points)
    return nodes, nodes / spec.points


def choose_radius(params: ModelParams, k_max: int | None = None, profile=None,
                  margin: float = 1.1) -> float:
    """``margin * max(1, tau, (1 + sqrt(1 + 4pq)) / (2q))``.

    On and outside this circle the pair denominators ``p + q xi_i xi_j - xi_i``
    and the transfer-matrix denominators cannot vanish.  ``k_max`` and
    ``profile`` do not move the bound; they are accepted so callers can pass
    the full request context.
    """
    p, q = float(params.p), float(params.q)
    return margin * max(1.0, p / q, (1 + math.sqrt(1 + 4 * p * q)) / (2 * q))


def evaluation_radius(params: ModelParams, k_max: int | None = None, profile=None) -> float:
    """Default contour radius for evaluation: admissible and well separated from the poles.

    Every singularity of the integrand lies within ``max(1, tau, 1/q + p/(qR))``
    of the origin, so ``2.5 * max(1, tau, 1/q)`` keeps the trapezoid aliasing
    factor near 0.4 per node while staying above :func:`choose_radius`.
    """
    p, q = float(params.p), float(params.q)
    return max(choose_radius(params, k_max, profile), 2.5 * max(1.0, p / q, 1 / q))


@dataclass
class EvalRequest:
    """One CDF evaluation: particle index, threshold, time, initial data and numerics."""

    l: int
    x: int
    t: float
    profile: Profile
    params: ModelParams
    k_max: int | None = None
    tolerance: float = 1e-8
    points: int = 48
    radius: float | None = None
    min_points: int = MIN_POINTS

    def __post_init__(self):
        if self.l < 1:
            raise DomainError(f"particle index must be >= 1, got {self.l}")
        if self.k_max is None:
            self.k_max = self.l + 4
        if self.k_max < self.l:
            raise DomainError(f"k_max={self.k_max} below l={self.l}")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.t < 0:
            raise DomainError("time must be non-negative")
        if not isinstance(self.profile, (RhoProfile, GeneralRhoProfile, SiteSet)):
            raise DomainError(f"unsupported profile type {type(self.profile).__name__}")
        if isinstance(self.profile, SiteSet) and len(self.profile) < self.l:
            raise DomainError(f"Y has fewer than {self.l} particles")

    def resolved_radius(self) -> float:
        if self.radius is not None:
            return self.radius
        return evaluation_radius(self.params, self.k_max, self.profile)

    def points_for(self, k: int, base: int | None = None) -> int:
        """Nodes per circle for term ``k``: halve per extra order, floored at ``min_points``."""
        base = self.points if base is None else base
        return max(self.min_points, base >> (k - self.l))


@dataclass
class CdfResult:
    """Value of P(x_l(t) <= x) with convergence diagnostics."""

    l: int
    x: int
    value: float
    imag_residual: float
    terms: list
    tail_estimate: float
    series_converged: bool
    quadrature_converged: bool
    quadrature_delta: float = float("nan")
    radius: float = float("nan")
    points: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.series_converged and self.quadrature_converged

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "x": self.x,
            "value": self.value,
            "imag_residual": self.imag_residual,
            "terms": [[t.real, t.imag] for t in self.terms],
            "tail_estimate": self.tail_estimate,
            "series_converged": self.series_converged,
            "quadrature_converged": self.quadrature_converged,
            "quadrature_delta": self.quadrature_delta,
            "radius": self.radius,
            "points": list(self.points),
        }


# -- integrand tables ---------------------------------------------------------

def _one_variable_table(nodes, weights, t, params):
    p, q = complex(params.p), complex(params.q)
    eps = p / nodes + q * nodes - 1
    return weights * np.exp(eps * t) / (1 - nodes)


def _pair_table(nodes, params):
    p, q = complex(params.p), complex(params.q)
    a = nodes[:, None]
    b = nodes[None, :]
    return (b - a) / (p + q * a * b - a)


def _transfer_tables(profile, k, nodes, spec, params):
    """Transfer matrices per variable and node: shape (k, M, J, S, S)."""
    M = nodes.shape[0]
    if isinstance(profile, RhoProfile):
        rho = profile.in_field(FLOATING)
        m = rho.m
        T = np.empty((k, M, M, m, m), dtype=np.complex128)
        xi_i = np.broadcast_to(nodes[:, None], (M, M))
        for i in range(1, k + 1):
            # suffix xi_i...xi_k has k-i+1 factors, each rotated by the grid shift
            angle = np.exp(2j * np.pi * (np.arange(M) + (k - i + 1) * spec.shift) / M)
            suffix = np.broadcast_to(spec.radius ** (k - i + 1) * angle[None, :], (M, M))
            entries = kernel.a_entries(i, k, xi_i, suffix, rho, params)
            for mu in range(m):
                for nu in range(m):
                    T[i - 1, :, :, mu, nu] = entries[mu][nu]
        return T, True
    if isinstance(profile, GeneralRhoProfile):
        rho = profile.in_field(FLOATING)
        S = rho.N + 1
        T = np.zeros((k, M, 1, S, S), dtype=np.complex128)
        for i in range(1, k + 1):
            entries = kernel.b_entries(i, k, nodes, rho, params)
            for mu in range(S):
                for nu in range(mu + 1, S):
                    T[i - 1, :, 0, mu, nu] = entries[mu][nu]
        return T, False
    # deterministic Y: states are 0 (start) and the ranks 1..n of Y
    ys = list(profile)
    n = len(ys)
    tau = complex(params.tau)
    T = np.zeros((k, M, 1, n + 1, n + 1), dtype=np.complex128)
    for i in range(1, k + 1):
        for nu in range(max(i, 1), n + 1):
            col = tau ** (nu - i) * nodes ** (-ys[nu - 1])
            for mu in range(nu):
                T[i - 1, :, 0, mu, nu] = col
    return T, False


def binned_integral(profile: Profile, k: int, t: float, params: ModelParams,
                    spec: ContourSpec) -> np.ndarray:
    """Angle-binned trapezoid sum of ``I(0, k, xi) * factor(xi)`` over the k-torus.

    Multiply bin ``J`` by ``R^{k x} e^{2 pi i J x / M}`` and sum to get the
    integral at threshold ``x``.
    """
    params = params.in_field(FLOATING)
    nodes, weights = contour_nodes(spec)
    g = _one_variable_table(nodes, weights, t, params)
    F = _pair_table(nodes, params)
    T, suffix_dependent = _transfer_tables(profile, k, nodes, spec, params)
    return torus_sum(g, F, T, suffix_dependent)


def _resolve_bins(binned: np.ndarray, k: int, spec: ContourSpec, xs: Sequence[int]) -> np.ndarray:
    M = binned.shape[0]
    xs = np.asarray(xs, dtype=np.int64)
    # (xi_1...xi_k)^x = R^{kx} exp(2 pi i (J + k shift) x / M); reduce mod M before scaling
    turns = np.outer(xs, np.arange(M)) % M + np.mod(k * spec.shift * xs, M)[:, None]
    phase = np.exp(2j * np.pi * turns / M)
    return spec.radius ** (k * xs.astype(float)) * (phase @ binned)


def series_terms(request: EvalRequest, k: int, spec: ContourSpec,
                 xs: Sequence[int] | None = None) -> np.ndarray:
    """Term ``k`` of the series at each threshold in ``xs`` (default: ``request.x``)."""
    if not request.l <= k <= request.k_max:
        raise DomainError(f"need l <= k <= k_max, got k={k}")
    xs = [request.x] if xs is None else list(xs)
    pref = complex(combined_prefactor(request.l, k, request.params))
    if pref == 0:
        return np.zeros(len(xs), dtype=np.complex128)
    if isinstance(request.profile, SiteSet) and k > len(request.profile):
        return np.zeros(len(xs), dtype=np.complex128)
    binned = binned_integral(request.profile, k, request.t, request.params, spec)
    return pref * _resolve_bins(binned, k, spec, xs)


def series_term(request: EvalRequest, k: int, spec: ContourSpec) -> complex:
    return complex(series_terms(request, k, spec)[0])


def _integrate_term(request, k, xs, radius, M, check, share, max_doublings=3):
    """Term ``k`` on an ``M``-point grid, refined until its change is below ``share``.

    Returns (values, error estimate, final M).  Grids are doubled while the
    tensor grid stays within :data:`CHECK_BUDGET`; past that the term is
    re-integrated on the half-spacing rotated grid, which flips the sign of
    the leading aliasing error, and the difference is the estimate.
    """
    spec = ContourSpec(radius, M)
    spec.validate(request.params)
    values = series_terms(request, k, spec, xs)
    if not check:
        return values, np.full(len(xs), np.nan), M
    if not np.any(values):
        return values, np.zeros(len(xs)), M
    delta = np.full(len(xs), np.inf)
    for _ in range(max_doublings):
        if (2 * M) ** k <= CHECK_BUDGET:
            M *= 2
            fine = series_terms(request, k, ContourSpec(radius, M), xs)
            delta = np.abs(fine - values)
            values = fine
            if np.all(delta < share):
                break
        else:
            shifted = series_terms(request, k, ContourSpec(radius, M, 0.5), xs)
            delta = np.abs(shifted - values)
            break
    return values, delta, M


def evaluate_cdf_window(request: EvalRequest, xs: Sequence[int], check_quadrature: bool = True):
    """Evaluate the CDF at every ``x`` in ``xs``; ``request.x`` is ignored.

    With ``check_quadrature`` each term is refined adaptively (see
    :func:`_integrate_term`) and the summed per-term changes become
    ``quadrature_delta``.
    """
    xs = list(xs)
    radius = request.resolved_radius()
    ks = range(request.l, request.k_max + 1)
    share = request.tolerance / len(ks)
    rows, deltas, points = [], [], []
    for k in ks:
        values, delta, M = _integrate_term(request, k, xs, radius, request.points_for(k),
                                           check_quadrature, share)
        rows.append(values)
        deltas.append(delta)
        points.append(M)
        log.debug("term k=%d on %d points: max |term| %.3e", k, M, np.abs(values).max())
    terms = np.array(rows)
    totals = terms.sum(axis=0)
    quad_delta = np.array(deltas).sum(axis=0)
    # a finite Y has no terms past k = |Y|, so the truncated series is the whole series
    exhausted = isinstance(request.profile, SiteSet) and request.k_max >= len(request.profile)
    results = []
    for col, x in enumerate(xs):
        value = totals[col]
        last = 0.0 if exhausted else abs(terms[-1, col])
        series_ok = bool(last < request.tolerance * max(1.0, abs(value.real)))
        quad_ok = bool(quad_delta[col] < request.tolerance) if check_quadrature else False
        results.append(CdfResult(
            l=request.l, x=x, value=float(value.real), imag_residual=float(abs(value.imag)),
            terms=[complex(v) for v in terms[:, col]], tail_estimate=float(last),
            series_converged=series_ok, quadrature_converged=quad_ok,
            quadrature_delta=float(quad_delta[col]), radius=radius, points=list(points)))
    return results


def evaluate_cdf(request: EvalRequest, check_quadrature: bool = True) -> CdfResult:
    return evaluate_cdf_window(request, [request.x], check_quadrature)[0]


def evaluate_pmf(request: EvalRequest, check_quadrature: bool = True) -> float:
    """``P(x_l(t) = x)`` as a CDF difference; reported raw, small negatives included."""
    lo, hi = evaluate_cdf_window(request, [request.x - 1, request.x], check_quadrature)
    return hi.value - lo.value


def evaluate_pmf_window(request: EvalRequest, xs: Sequence[int], check_quadrature: bool = True):
    """PMF at each ``x`` together with the CDF results it was differenced from."""
    xs = list(xs)
    grid = sorted(set(xs) | {x - 1 for x in xs})
    cdf = {r.x: r for r in evaluate_cdf_window(request, grid, check_quadrature)}
    return [(x, cdf[x].value - cdf[x - 1].value, cdf[x]) for x in xs]
