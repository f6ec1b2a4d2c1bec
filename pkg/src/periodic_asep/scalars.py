"""Scalar fields, model parameters, site sets and the combinatorial prefactors.

Every formula in the package is written against plain arithmetic operators so
the same code runs on :class:`fractions.Fraction` (exact) and on ``complex``
(floating).  :class:`ScalarField` converts inputs into one or the other.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Union

from .errors import DomainError, ParameterError

Number = Union[int, Fraction, float, complex]

#: largest series index accepted by the prefactors
MAX_K = 64


def to_fraction(value) -> Fraction:
    """Parse ``"1/3"``, ints, Fractions (and floats, exactly) into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def _to_complex(value) -> complex:
    if isinstance(value, str):
        value = Fraction(value)
    return complex(value)


@dataclass(frozen=True)
class ScalarField:
    """A number system the formulas can be instantiated in."""

    name: str
    convert: Callable[[object], Number]
    exact: bool

    def __call__(self, value) -> Number:
        return self.convert(value)

    def zero(self) -> Number:
        return self.convert(0)

    def one(self) -> Number:
        return self.convert(1)


EXACT = ScalarField("exact", to_fraction, True)
FLOATING = ScalarField("floating", _to_complex, False)


@dataclass(frozen=True)
class ModelParams:
    """Hop probabilities ``p`` (right) and ``q`` (left) with ``tau = p / q``.

    Construct with :meth:`from_p` or directly with both values; ``p + q == 1``,
    ``q != 0`` and ``tau != 1`` are enforced.
    """

    p: Number
    q: Number

    def __post_init__(self):
        p, q = self.p, self.q
        exact = isinstance(p, (int, Fraction)) and isinstance(q, (int, Fraction))
        if exact:
            if p + q != 1:
                raise ParameterError(f"p + q must equal 1, got {p} + {q}")
        elif abs(p + q - 1) > 1e-12:
            raise ParameterError(f"p + q must equal 1, got {p} + {q}")
        if q == 0:
            raise ParameterError("q = 0 is excluded (tau = p/q undefined)")
        if p == q:
            raise ParameterError("tau = 1 (p = q) is excluded")

    @classmethod
    def from_p(cls, p) -> "ModelParams":
        p = to_fraction(p)
        return cls(p, 1 - p)

    @property
    def tau(self) -> Number:
        return self.p / self.q

    @property
    def is_exact(self) -> bool:
        return isinstance(self.p, (int, Fraction)) and isinstance(self.q, (int, Fraction))

    def in_field(self, field: ScalarField) -> "ModelParams":
        if field.exact:
            return ModelParams(to_fraction(self.p), to_fraction(self.q))
        return ModelParams(field(self.p), field(self.q))

    def as_strings(self) -> dict:
        return {"p": str(self.p), "q": str(self.q)}


@dataclass(frozen=True)
class SiteSet:
    """Strictly increasing tuple of positive integer sites.

    Python indexing is 0-based; :meth:`s` gives the 1-based element ``s_i``.
    """

    sites: tuple

    def __init__(self, sites: Iterable[int] = ()):
        sites = tuple(int(s) for s in sites)
        for a, b in zip(sites, sites[1:]):
            if not a < b:
                raise DomainError(f"sites must be strictly increasing: {sites}")
        if sites and sites[0] < 1:
            raise DomainError(f"sites must be positive: {sites}")
        object.__setattr__(self, "sites", sites)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __getitem__(self, item):
        return self.sites[item]

    def __contains__(self, site):
        i = bisect.bisect_left(self.sites, site)
        return i < len(self.sites) and self.sites[i] == site

    def s(self, i: int) -> int:
        if not 1 <= i <= len(self.sites):
            raise DomainError(f"index {i} outside 1..{len(self.sites)}")
        return self.sites[i - 1]

    def issubset(self, other: "SiteSet") -> bool:
        return all(s in other for s in self.sites)

    @property
    def size(self) -> int:
        return len(self.sites)


def tau_binomial(N: int, l: int, tau):
    """Gaussian binomial ``[N over l]`` in the variable ``tau``."""
    one = tau ** 0
    if l == 0:
        return one
    if l < 0 or (N >= 0 and l > N):
        return one - one
    if N < 0:
        raise DomainError(f"N must be non-negative, got {N}")
    if tau == 1:
        raise ParameterError("tau-binomial with tau = 1 is degenerate")
    num = one
    den = one
    for j in range(l):
        num *= 1 - tau ** (N - j)
        den *= 1 - tau ** (j + 1)
    return num / den


def sigma_count(U: Iterable[int], V: Iterable[int]) -> int:
    """Number of pairs ``(u, v)`` in ``U x V`` with ``u >= v``."""
    v_sorted = sorted(V)
    return sum(bisect.bisect_right(v_sorted, u) for u in U)


def _check_lk(l: int, k: int):
    if not 1 <= l <= k:
        raise DomainError(f"need 1 <= l <= k, got l={l}, k={k}")
    if k > MAX_K:
        raise DomainError(f"k={k} exceeds the supported maximum {MAX_K}")


def combined_prefactor(l: int, k: int, params: ModelParams):
    """``c_{l,k} * tau^{k(k+1)/2}`` with the tau exponents merged.

    The merged exponent ``(k-l)(k-l+1)/2`` is non-negative, so this is finite
    for ``tau = 0`` where the two factors separately are not.
    """
    _check_lk(l, k)
    tau = params.tau
    sign = -1 if l % 2 else 1
    return (sign * params.q ** (k * (k - 1) // 2)
            * tau ** ((k - l) * (k - l + 1) // 2)
            * tau_binomial(k - 1, l - 1, tau))


def c_raw(l: int, k: int, params: ModelParams):
    """The series coefficient ``c_{l,k}`` on its own; singular at ``tau = 0``."""
    _check_lk(l, k)
    tau = params.tau
    if tau == 0:
        raise ParameterError("c_{l,k} needs tau != 0 (negative power of tau)")
    sign = -1 if l % 2 else 1
    return (sign * params.q ** (k * (k - 1) // 2)
            * tau ** (l * (l - 1) // 2 - k * l)
            * tau_binomial(k - 1, l - 1, tau))
