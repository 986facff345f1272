"""Closed-form disconnection quantities, evaluated in log space.

Logarithms are natural throughout.  Rewriting (.)^(c log N) as
N^(c log(.)) is an identity only in base e, and c(3.6, 11) = 0.12905
matches the reference constant 0.129 only with natural logs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError
from .geometry import grid_capacity, l_max, l_min_upper

DEFAULT_C = 0.129
# a known sufficient constant: c ln N neighbors with c above this connect the network
UPPER_C = 5.1774
FORM_AGREEMENT_RTOL = 1e-12


class TrapTooLargeWarning(UserWarning):
    """The trap's outer disk has area larger than the unit square."""


@dataclass(frozen=True)
class FillingParams:
    N: float
    r: float
    a: float
    L: int
    k: int

    def __post_init__(self):
        for name in ("N", "r", "a"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")
        if self.L < 0 or int(self.L) != self.L:
            raise DomainError(f"L must be a nonnegative integer, got {self.L}")
        if self.k < 0 or int(self.k) != self.k:
            raise DomainError(f"k must be a nonnegative integer, got {self.k}")

    @property
    def inner_mean(self) -> float:
        return self.N * math.pi * self.r ** 2

    @property
    def subdisk_mean(self) -> float:
        return self.N * math.pi * self.a ** 2 * self.r ** 2 / 4.0

    @property
    def outer_mean(self) -> float:
        return self.N * math.pi * (1 + 2 * self.a) ** 2 * self.r ** 2

    @property
    def trap_exceeds_square(self) -> bool:
        return math.pi * ((1 + 2 * self.a) * self.r) ** 2 > 1.0


def _log_poisson_mass(k: int, mean: float) -> float:
    return k * math.log(mean) - mean - math.lgamma(k + 1)


def log_p_k_filling(params: FillingParams) -> float:
    """log of (N pi r^2)^k/k! [(N pi a^2 r^2/4)^k/k!]^L exp(-N pi (1+2a)^2 r^2)."""
    k, L = params.k, params.L
    lk = math.lgamma(k + 1)
    return (k * math.log(params.inner_mean) - lk
            + L * (k * math.log(params.subdisk_mean) - lk)
            - params.outer_mean)


def log_p_k_filling_product(params: FillingParams) -> float:
    """Same probability as a product of independent Poisson masses.

    Inner disk holds k, every sub-disk holds k, and the rest of the outer
    disk is empty.
    """
    rest = params.outer_mean - params.inner_mean - params.L * params.subdisk_mean
    return (_log_poisson_mass(params.k, params.inner_mean)
            + params.L * _log_poisson_mass(params.k, params.subdisk_mean)
            - rest)


def p_k_filling(params: FillingParams) -> float:
    """Probability of a k-filling event for one trap in the Poisson model."""
    if params.trap_exceeds_square:
        warnings.warn(f"outer disk of {params} has area > 1", TrapTooLargeWarning, stacklevel=2)
    lp = log_p_k_filling(params)
    lq = log_p_k_filling_product(params)
    # the two forms differ only by rounding; scale the tolerance with term size
    scale = max(1.0, abs(params.outer_mean), abs(params.k * (params.L + 1) * math.log(params.inner_mean)))
    if abs(lp - lq) > FORM_AGREEMENT_RTOL * scale:
        raise AssertionError(f"k-filling forms disagree: {lp!r} vs {lq!r}")
    return math.exp(lp)


def log_p_at_least(params: FillingParams) -> float:
    """log P(>= k in the inner disk and each sub-disk, nothing else in the outer disk)."""
    from scipy.special import gammainc

    rest = params.outer_mean - params.inner_mean - params.L * params.subdisk_mean
    if params.k == 0:
        return -rest

    def log_tail(mean):
        if mean >= params.k:
            # P(X >= k) = regularized lower incomplete gamma P(k, mean), here >= ~1/2
            return math.log(gammainc(params.k, mean))
        # deep tail: P(X = k) * sum_j mean^j k!/(k+j)!, which converges fast for mean < k
        total, term, j = 1.0, 1.0, 0
        while term > 1e-17 * total:
            j += 1
            term *= mean / (params.k + j)
            total += term
        return _log_poisson_mass(params.k, mean) + math.log(total)

    subs = params.L * log_tail(params.subdisk_mean) if params.L else 0.0
    return log_tail(params.inner_mean) + subs - rest


def ln_g(a: float, L: int) -> float:
    """log of (L+1)^(L+1) a^(2L) / (4^L (1+2a)^(2(L+1)))."""
    if not a > 0:
        raise DomainError(f"a must be positive, got {a}")
    if L < 0:
        raise DomainError(f"L must be >= 0, got {L}")
    return ((L + 1) * math.log(L + 1) + 2 * L * math.log(a)
            - L * math.log(4.0) - 2 * (L + 1) * math.log1p(2 * a))


@dataclass(frozen=True)
class BoundEvaluation:
    a: float
    L: int
    ln_g: float
    c: float | None
    l_max: int
    l_min_upper: int
    feasible: bool

    def y(self, c: float | None = None) -> float:
        return (self.c if c is None else c) * self.ln_g


def c_bound(a: float, L: int, l_min: int | None = None) -> BoundEvaluation:
    """Largest c with y = c ln_g(a, L) > -1, plus feasibility.

    ``feasible`` needs ``l_min <= L <= l_max(a)`` (``l_min`` defaults to
    ``l_min_upper(a)``) and ``ln_g < 0``.  When ``ln_g >= 0`` the row is
    infeasible and ``c`` is None.
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    lg = ln_g(a, L)
    lm, lu = l_max(a), l_min_upper(a)
    lo = lu if l_min is None else l_min
    c = -1.0 / lg if lg < 0 else None
    return BoundEvaluation(a, int(L), lg, c, lm, lu, c is not None and lo <= L <= lm)


def y_exponent(c: float, a: float, L: int) -> float:
    return c * ln_g(a, L)


class RVariant(str, Enum):
    PAPER = "paper"
    STATIONARY = "stationary"


def r_star(N: float, k: int, a: float, L: int, variant: RVariant | str = RVariant.PAPER) -> float:
    """Trap radius at which f is evaluated.

    ``paper`` returns sqrt(k(L+1) / (N pi (1+2a)^2)), the value substituted
    in the derivation; ``stationary`` uses k(L+1) - 1, the exact zero of
    df/d(r^2).
    """
    variant = RVariant(variant)
    m = k * (L + 1)
    if variant is RVariant.STATIONARY:
        if m <= 1:
            raise DomainError(f"stationary r* needs k(L+1) > 1, got {m}")
        m -= 1
    return math.sqrt(m / (N * math.pi * (1 + 2 * a) ** 2))


def f_log(N: float, k: int, a: float, L: int, r: float) -> float:
    """log f(a, r): the floor-free trap count times the k-filling probability."""
    return -2.0 * math.log(2.0 * (1 + 2 * a) * r) + log_p_k_filling(FillingParams(N, r, a, L, k))


@dataclass(frozen=True)
class ConnectivityBound:
    r: float
    S: int
    p_k_filling: float
    finite: float        # (1 - P)^S
    asymptotic: float    # exp(-S P), the large-S approximation
    vacuous: bool


def connectivity_upper_bound(N: float, k: int, a: float, L: int) -> ConnectivityBound:
    """Upper bound on P(connected) for the Poisson model at r = r_star, ``paper`` variant."""
    r = r_star(N, k, a, L, RVariant.PAPER)
    S, _ = grid_capacity(a, r)
    params = FillingParams(N, r, a, L, k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrapTooLargeWarning)
        lp = log_p_k_filling(params)
    p = math.exp(lp)
    if S == 0:
        return ConnectivityBound(r, 0, p, 1.0, 1.0, True)
    finite = math.exp(S * math.log1p(-p)) if p < 1 else 0.0
    return ConnectivityBound(r, S, p, finite, math.exp(-S * p), False)


def theorem1_threshold(N: float, c: float = DEFAULT_C) -> float:
    """c ln N: below this many neighbors the Poisson network disconnects."""
    if not N > 1:
        raise DomainError(f"N must exceed 1, got {N}")
    return c * math.log(N)


def theorem2_argument(N: float) -> float:
    return N + math.pi / 4 - math.sqrt(math.pi * N / 2 + math.pi ** 2 / 16)


def theorem2_threshold(N: float, c: float = DEFAULT_C) -> float:
    """c ln(N + pi/4 - sqrt(pi N/2 + pi^2/16)) for the fixed-N model (may be negative)."""
    if not N >= 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return c * math.log(theorem2_argument(N))


def recommended_k(threshold: float) -> int:
    """Largest integer k strictly below ``threshold``, clamped at 0."""
    return max(0, math.ceil(threshold) - 1)
