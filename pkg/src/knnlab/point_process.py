"""Node placement in the unit square: fixed-N and Poisson models.

A seed splits into two sub-streams: label 1 drives the Poisson count,
label 2 the coordinates (x_j, y_j) = (U[2j], U[2j+1]).  Because the
coordinates of point j depend only on (seed, j), a fixed-N sample of n
points is a prefix of any larger sample with the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln

from . import rng
from .errors import DomainError
from .geometry import Disk

COUNT_STREAM = 1
POSITION_STREAM = 2
INVERSION_MAX_MEAN = 30.0


class Model(str, Enum):
    FIXED = "fixed"
    POISSON = "poisson"


@dataclass(frozen=True, eq=False)
class PointSet:
    model: Model
    intensity: float
    seed: int
    points: np.ndarray

    @property
    def actual_count(self) -> int:
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, PointSet):
            return NotImplemented
        return (self.model == other.model and self.intensity == other.intensity
                and self.seed == other.seed and np.array_equal(self.points, other.points))


def _positions(seed: int, n: int) -> np.ndarray:
    key = rng.derive_seed(seed, POSITION_STREAM)
    return rng.uniform_block(key, 0, 2 * n).reshape(n, 2)


def sample_fixed(n: int, seed: int) -> PointSet:
    """Exactly ``n`` i.i.d. uniform points in [0, 1]^2."""
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
    n = int(n)
    return PointSet(Model.FIXED, float(n), seed, _positions(seed, n))


# -- Poisson counts ---------------------------------------------------------

def _poisson_inversion(mean: float, keys: np.ndarray) -> np.ndarray:
    # sequential search on one uniform per key
    u = rng.uniform(keys, np.zeros(len(keys), dtype=np.uint64))
    out = np.zeros(len(keys), dtype=np.int64)
    p = math.exp(-mean)
    cdf = np.full(len(keys), p)
    active = u > cdf
    x = 0
    # the cap only matters when u rounds above the float cdf limit
    cap = int(mean + 40.0 * math.sqrt(mean) + 40.0)
    while active.any() and x < cap:
        x += 1
        p *= mean / x
        out[active] = x
        cdf = cdf + p
        active &= u > cdf
    return out


def _poisson_ptrs(mean: float, keys: np.ndarray) -> np.ndarray:
    # Hormann's transformed rejection with squeeze (PTRS); attempt t uses
    # counters 2t and 2t+1 of each key's stream
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    n = len(keys)
    out = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    attempt = 0
    while pending.size:
        k_ = keys[pending]
        c = np.full(pending.size, 2 * attempt, dtype=np.uint64)
        U = rng.uniform(k_, c) - 0.5
        V = rng.uniform(k_, c + np.uint64(1))
        us = 0.5 - np.abs(U)
        with np.errstate(divide="ignore"):
            kk = np.floor((2.0 * a / us + b) * U + mean + 0.43)
            quick = (us >= 0.07) & (V <= vr)
            reject = (kk < 0) | ((us < 0.013) & (V > us))
            lhs = np.log(V) + math.log(invalpha) - np.log(a / (us * us) + b)
            rhs = -mean + kk * loglam - gammaln(np.maximum(kk, 0.0) + 1.0)
        accept = quick | (~reject & (lhs <= rhs))
        out[pending[accept]] = kk[accept].astype(np.int64)
        pending = pending[~accept]
        attempt += 1
    return out


def poisson_counts(mean: float, seeds) -> np.ndarray:
    """One Poisson(mean) count per seed; count ``i`` depends only on ``seeds[i]``."""
    if not mean > 0:
        raise DomainError(f"Poisson mean must be positive, got {mean}")
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    keys = rng.derive_child_keys(_base_keys(seeds), COUNT_STREAM)
    if mean <= INVERSION_MAX_MEAN:
        return _poisson_inversion(mean, keys)
    return _poisson_ptrs(mean, keys)


def _base_keys(seeds: np.ndarray) -> np.ndarray:
    # vectorised derive_seed(seed) (the path-free step)
    return rng._mix64_array(seeds + rng._GOLDEN_U)


def sample_poisson(N: float, seed: int) -> PointSet:
    """Homogeneous Poisson process of intensity N on the unit square."""
    count = int(poisson_counts(N, [seed])[0])
    return PointSet(Model.POISSON, float(N), seed, _positions(seed, count))


def sample_poisson_batch(N: float, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Sample many Poisson point sets at once.

    Returns ``(points, owner)`` where ``owner[j]`` is the index into
    ``seeds`` of the set point j belongs to.  Points of each set appear in
    the same order, with the same coordinates, as ``sample_poisson``.
    """
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    counts = poisson_counts(N, seeds)
    owner = np.repeat(np.arange(len(seeds)), counts)
    starts = np.cumsum(counts) - counts
    local = np.arange(owner.size) - starts[owner]
    keys = rng.derive_child_keys(_base_keys(seeds), POSITION_STREAM)[owner]
    c = 2 * local.astype(np.uint64)
    pts = np.column_stack((rng.uniform(keys, c), rng.uniform(keys, c + np.uint64(1))))
    return pts, owner


def sample(model: Model | str, N: float, seed: int) -> PointSet:
    model = Model(model)
    if model is Model.FIXED:
        return sample_fixed(int(round(N)), seed)
    return sample_poisson(N, seed)


def region_count(points: PointSet | np.ndarray, disk: Disk) -> int:
    """Number of points in the closed disk."""
    pts = points.points if isinstance(points, PointSet) else points
    if len(pts) == 0:
        return 0
    return int(np.count_nonzero(disk.contains(pts)))


# -- exact Poisson masses ---------------------------------------------------

_STIRL_SERIES = (1.0 / 12, 1.0 / 360, 1.0 / 1260, 1.0 / 1680, 1.0 / 1188)


def _stirlerr(n: np.ndarray) -> np.ndarray:
    # log(n!) - log(sqrt(2 pi n) (n/e)^n)
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    ns = n[small]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[small] = gammaln(ns + 1) - (ns + 0.5) * np.log(ns) + ns - 0.5 * math.log(2 * math.pi)
    nl = n[~small]
    nn = nl * nl
    s0, s1, s2, s3, s4 = _STIRL_SERIES
    out[~small] = (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / nl
    return out


def _bd0(x: np.ndarray, mean: float) -> np.ndarray:
    # x log(x/mean) + mean - x, without cancellation near x = mean
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    near = np.abs(x - mean) < 0.1 * (x + mean)
    far = ~near
    with np.errstate(divide="ignore", invalid="ignore"):
        out[far] = x[far] * np.log(x[far] / mean) + mean - x[far]
    xn = x[near]
    v = (xn - mean) / (xn + mean)
    s = (xn - mean) * v
    ej = 2.0 * xn * v
    v2 = v * v
    for j in range(1, 1000):
        ej = ej * v2
        s_new = s + ej / (2 * j + 1)
        if np.all(s_new == s):
            break
        s = s_new
    out[near] = s
    return out


def poisson_log_pmf(j, mean: float) -> np.ndarray:
    """log P(X = j) for X ~ Poisson(mean), accurate for large ``mean``."""
    j = np.asarray(j, dtype=float)
    out = np.full(j.shape, -np.inf)
    zero = j == 0
    out[zero] = -mean
    pos = j > 0
    jp = j[pos]
    out[pos] = -_stirlerr(jp) - _bd0(jp, mean) - 0.5 * np.log(2 * math.pi * jp)
    return out


def window_bounds(N: float) -> tuple[int, int]:
    """Integer window [ceil(N - w), floor(N + w)] with w = sqrt(pi N / 2), clipped at 0."""
    w = math.sqrt(math.pi * N / 2.0)
    return max(0, math.ceil(N - w)), math.floor(N + w)


def poisson_window_probability(N: float) -> float:
    """P(h(N) in [N - sqrt(pi N/2), N + sqrt(pi N/2)]) for h(N) ~ Poisson(N)."""
    if not N > 0:
        raise DomainError(f"N must be positive, got {N}")
    lo, hi = window_bounds(N)
    total = 0.0
    chunk = 1 << 20
    for start in range(lo, hi + 1, chunk):
        j = np.arange(start, min(hi + 1, start + chunk), dtype=float)
        total += math.fsum(np.exp(poisson_log_pmf(j, N)))
    return min(total, 1.0)


def window_normal_limit() -> float:
    """Central-limit value 2 Phi(sqrt(pi/2)) - 1 of the window probability."""
    return math.erf(math.sqrt(math.pi / 2.0) / math.sqrt(2.0))
