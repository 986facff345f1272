"""Search over (a, L) for the largest lower-bound constant c.

``l_max(a)`` is a step function of ``a``, and on the plateau where it
equals L the bound c(a, L) rises until a = L/2.  For the plateaus that
matter the optimum therefore sits on a plateau's upper endpoint, which a
plain grid only approaches.  The search combines a grid, golden-section
refinement inside each plateau, and exact evaluation at the endpoints.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

from .analytics import BoundEvaluation, c_bound, ln_g
from .errors import DomainError, SearchError
from .geometry import l_max, l_min_upper, numeric_l_min

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0
BISECT_TOL = 1e-12
# l_max(a) >= 9 for every a, since sup asin(a/(2+3a)) = asin(1/3) > pi/10
MIN_LMAX = 9


class LPolicy(str, Enum):
    LMAX_ONLY = "lmax_only"
    FULL_SWEEP = "full_sweep"


@dataclass(frozen=True)
class SearchConfig:
    a_min: float = 0.1
    a_max: float = 10.0
    a_step: float = 1e-3
    L_policy: LPolicy = LPolicy.LMAX_ONLY
    refine: bool = True
    relax_l_min: bool = False  # use numeric_l_min instead of l_min_upper

    def __post_init__(self):
        if not (0 < self.a_min <= self.a_max):
            raise DomainError(f"need 0 < a_min <= a_max, got {self.a_min}, {self.a_max}")
        if not self.a_step > 0:
            raise DomainError(f"a_step must be positive, got {self.a_step}")
        object.__setattr__(self, "L_policy", LPolicy(self.L_policy))


@dataclass
class SearchResult:
    best: BoundEvaluation
    grid: list[BoundEvaluation]
    plateau_boundaries: list[float]
    grid_best: BoundEvaluation | None = None
    refined: list[BoundEvaluation] = field(default_factory=list)

    @property
    def best_a(self) -> float:
        return self.best.a

    @property
    def best_L(self) -> int:
        return self.best.L

    @property
    def best_c(self) -> float:
        return self.best.c


def plateau_upper_endpoint(L: int) -> float:
    """The a with asin(a/(2+3a)) = pi/L, by bisection; inf when L <= 9."""
    target = math.sin(math.pi / L)
    if target >= 1.0 / 3.0:
        return math.inf
    lo, hi = 0.0, 1.0
    while hi / (2 + 3 * hi) < target:
        hi *= 2.0
    while hi - lo > BISECT_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid / (2 + 3 * mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


def plateau_table(a_min: float, a_max: float) -> list[tuple[int, tuple[float, float]]]:
    """Intervals of a on which l_max(a) is constant, clipped to [a_min, a_max].

    Plateau L is the half-open interval (endpoint(L+1), endpoint(L)];
    ordered by increasing a, so L decreases down the list.
    """
    if not 0 < a_min < a_max:
        raise DomainError(f"need 0 < a_min < a_max, got {a_min}, {a_max}")
    out = []
    for L in range(l_max(a_max), l_max(a_min) + 1):
        lo = plateau_upper_endpoint(L + 1)
        hi = plateau_upper_endpoint(L)
        lo_c, hi_c = max(lo, a_min), min(hi, a_max)
        if lo_c < hi_c or (lo_c == hi_c and lo < a_min):
            out.append((L, (lo_c, hi_c)))
    out.sort(key=lambda item: item[1][0])
    return out


def _L_range(a: float, policy: LPolicy, relax: bool) -> range:
    top = l_max(a)
    if policy is LPolicy.LMAX_ONLY:
        return range(top, top + 1)
    bottom = numeric_l_min(a) if relax else l_min_upper(a)
    return range(bottom, top + 1)


def _eval(a: float, L: int, relax: bool, lm: int | None = None) -> BoundEvaluation:
    ev = c_bound(a, L, l_min=numeric_l_min(a) if relax else None)
    if lm is not None and lm != ev.l_max:
        # at a plateau endpoint floor(pi/asin(.)) can round to L-1
        ev = BoundEvaluation(ev.a, ev.L, ev.ln_g, ev.c, lm, ev.l_min_upper,
                             ev.c is not None and ev.L <= lm and
                             (numeric_l_min(a) if relax else ev.l_min_upper) <= ev.L)
    return ev


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    x1 = hi - GOLDEN_RATIO * (hi - lo)
    x2 = lo + GOLDEN_RATIO * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    while hi - lo > tol * max(1.0, abs(hi)):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN_RATIO * (hi - lo)
            f2 = fn(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN_RATIO * (hi - lo)
            f1 = fn(x1)
    return 0.5 * (lo + hi)


def _dln_g_da(a: float, L: int) -> float:
    return 2 * L / a - 4 * (L + 1) / (1 + 2 * a)


def _assert_unimodal(L: int, lo: float, hi: float, samples: int = 257) -> None:
    # c(., L) is increasing exactly where ln_g is; its derivative changes sign once (at a = L/2)
    signs = []
    for i in range(samples):
        a = lo + (hi - lo) * i / (samples - 1)
        d = _dln_g_da(a, L)
        if d != 0:
            signs.append(d > 0)
    changes = sum(1 for s, t in zip(signs, signs[1:]) if s != t)
    if changes > 1 or (changes == 1 and not signs[0]):
        raise AssertionError(f"c(., {L}) is not unimodal on [{lo}, {hi}]")


def _better(x: BoundEvaluation | None, y: BoundEvaluation) -> bool:
    return y.feasible and (x is None or y.c > x.c)


def search(config: SearchConfig = SearchConfig()) -> SearchResult:
    """Maximise c(a, L) over a grid of a (and L per the policy)."""
    cfg = config
    n = int(math.floor((cfg.a_max - cfg.a_min) / cfg.a_step + 1e-9))
    grid: list[BoundEvaluation] = []
    best = None
    for i in range(n + 1):
        a = cfg.a_min + i * cfg.a_step
        if a > cfg.a_max:
            break
        for L in _L_range(a, cfg.L_policy, cfg.relax_l_min):
            ev = _eval(a, L, cfg.relax_l_min)
            grid.append(ev)
            if _better(best, ev):
                best = ev
    grid_best = best

    plateaus = plateau_table(cfg.a_min, cfg.a_max) if cfg.a_min < cfg.a_max else []
    boundaries = [hi for _, (lo, hi) in plateaus if hi < cfg.a_max]
    refined = []
    if cfg.refine:
        for L, (lo, hi) in plateaus:
            _assert_unimodal(L, lo, hi)
            Ls = [L] if cfg.L_policy is LPolicy.LMAX_ONLY else None
            a_peak = _golden_max(lambda a: ln_g(a, L), lo, hi)
            for a in (a_peak, hi):
                for LL in (Ls or _L_range_at(a, L, cfg.relax_l_min)):
                    ev = _eval(a, LL, cfg.relax_l_min, lm=L)
                    refined.append(ev)
                    if _better(best, ev):
                        best = ev
    if best is None:
        raise SearchError(f"no feasible (a, L) in {cfg}")
    return SearchResult(best, grid, boundaries, grid_best, refined)


def _L_range_at(a: float, lm: int, relax: bool) -> range:
    bottom = numeric_l_min(a) if relax else l_min_upper(a)
    return range(bottom, lm + 1)


def write_grid_csv(rows: list[BoundEvaluation], path) -> None:
    """Grid rows as CSV: a, L, l_max, l_min_upper, ln_g, c, feasible."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a", "L", "l_max", "l_min_upper", "ln_g", "c", "feasible"])
        for ev in rows:
            w.writerow([repr(ev.a), ev.L, ev.l_max, ev.l_min_upper, repr(ev.ln_g),
                        "" if ev.c is None else repr(ev.c), int(ev.feasible)])
