"""Trap structures d(r, a, L) and their combinatorial limits.

A trap is three concentric disks around ``X0`` (radii r, (1+a)r, (1+2a)r)
plus L sub-disks of radius ar/2 evenly spaced on the circle of radius
(1 + 3a/2)r, so each sub-disk exactly spans the annulus between (1+a)r and
(1+2a)r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, DomainError, InfeasibleTrapError, PlacementError

CERT_TOL = 1e-12
DEFAULT_CERT_ANGLES = 100_000


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise DomainError(f"disk radius must be >= 0, got {self.radius}")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Closed-disk membership mask for an (n, 2) array."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2


def _check_a(a: float) -> None:
    if not (a > 0 and math.isfinite(a)):
        raise DomainError(f"a must be a positive finite real, got {a}")


def _half_angle(a: float) -> float:
    # angle subtended at X0 by a sub-disk's radius
    return math.asin(a / (2.0 + 3.0 * a))


def half_chord_angle(a: float) -> float:
    """Full angle ``2 asin(a / (2 + 3a))`` subtended at the trap center by one sub-disk."""
    _check_a(a)
    return 2.0 * _half_angle(a)


def l_max(a: float) -> int:
    """Largest number of disjoint sub-disks that fit in the annulus."""
    _check_a(a)
    return math.floor(math.pi / _half_angle(a))


def l_min_upper(a: float) -> int:
    """Upper bound ``ceil(pi / (2 asin(a/(2+3a))))`` on the smallest disconnecting L."""
    _check_a(a)
    return math.ceil(math.pi / (2.0 * _half_angle(a)))


@dataclass(frozen=True)
class Trap:
    center: tuple[float, float]
    r: float
    a: float
    L: int
    phase: float = 0.0
    subdisk_centers: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def beta(self) -> float:
        """Angular spacing between adjacent sub-disk centers."""
        return 2.0 * math.pi / self.L

    @property
    def inner_disk(self) -> Disk:
        return Disk(self.center, self.r)

    @property
    def middle_disk(self) -> Disk:
        return Disk(self.center, (1.0 + self.a) * self.r)

    @property
    def outer_disk(self) -> Disk:
        return Disk(self.center, (1.0 + 2.0 * self.a) * self.r)

    @property
    def subdisk_radius(self) -> float:
        return self.a * self.r / 2.0

    @property
    def sub_disks(self) -> list[Disk]:
        rho = self.subdisk_radius
        return [Disk((float(x), float(y)), rho) for x, y in self.subdisk_centers]


def _subdisk_centers(center, r, a, L, phase) -> np.ndarray:
    rho = (1.0 + 1.5 * a) * r
    ang = phase + 2.0 * math.pi * np.arange(L) / L
    return np.column_stack((center[0] + rho * np.cos(ang), center[1] + rho * np.sin(ang)))


def build_trap(center, r: float, a: float, L: int, phase: float = 0.0,
               in_unit_square: bool = True) -> Trap:
    """Build a trap d(r, a, L) around ``center``.

    Raises InfeasibleTrapError when ``L > l_max(a)`` and, if
    ``in_unit_square``, PlacementError when the outer disk leaves [0, 1]^2.
    """
    _check_a(a)
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    if int(L) != L or L < 1:
        raise DomainError(f"L must be a positive integer, got {L}")
    L = int(L)
    lm = l_max(a)
    if L > lm:
        raise InfeasibleTrapError(f"L={L} exceeds l_max({a})={lm}")
    cx, cy = float(center[0]), float(center[1])
    if in_unit_square:
        R = (1.0 + 2.0 * a) * r
        if cx - R < 0 or cy - R < 0 or cx + R > 1 or cy + R > 1:
            raise PlacementError(
                f"outer disk of radius {R:.6g} at ({cx:.6g}, {cy:.6g}) leaves the unit square")
    phase = math.fmod(phase, 2.0 * math.pi)
    if phase < 0:
        phase += 2.0 * math.pi
    ys = _subdisk_centers((cx, cy), r, a, L, phase)
    return Trap((cx, cy), float(r), float(a), L, phase, ys)


def grid_capacity(a: float, r: float) -> tuple[int, list[tuple[float, float]]]:
    """Number S of disjoint traps on a square grid, and their centers.

    The unit square is cut into sub-squares of edge 2(1+2a)r and one trap is
    centered in each complete sub-square.
    """
    _check_a(a)
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    side = 2.0 * (1.0 + 2.0 * a) * r
    m = math.floor(1.0 / side)
    centers = [((i + 0.5) * side, (j + 0.5) * side) for j in range(m) for i in range(m)]
    return m * m, centers


def _probe_distances(a: float, L: int, probe_angles: np.ndarray, radius: float,
                     phase: float = 0.0) -> np.ndarray:
    # r = 1, X0 = origin: distance from each probe to its nearest sub-disk center
    ys = _subdisk_centers((0.0, 0.0), 1.0, a, L, phase)
    px = radius * np.cos(probe_angles)
    py = radius * np.sin(probe_angles)
    dx = px[:, None] - ys[None, :, 0]
    dy = py[:, None] - ys[None, :, 1]
    return np.sqrt(dx * dx + dy * dy).min(axis=1)


def _probe_angles(L: int, num_angles: int, phase: float) -> np.ndarray:
    grid = 2.0 * math.pi * np.arange(num_angles) / num_angles
    # analytic worst case: probes midway between adjacent sub-disks
    mids = phase + 2.0 * math.pi * (np.arange(L) + 0.5) / L
    # worst relative phase for the uniform grid: shift it by half a sub-disk spacing
    shifted = grid + math.pi / L
    return np.concatenate((grid, shifted, mids))


def containment_certificate(a: float, L: int, num_angles: int = DEFAULT_CERT_ANGLES,
                            full_exterior: bool = False,
                            exterior_scales=(1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0)) -> bool:
    """Check that every tangent probe disk swallows some sub-disk.

    Works at r = 1.  A probe center X1 on the circle of radius 1+2a carries
    the disk B_{2a}(X1); it contains B_{a/2}(Y_i) iff |X1 - Y_i| <= 3a/2.
    Returns True iff every probe finds such a sub-disk.

    Only boundary probes are needed: pushing X1 outward while keeping its
    disk tangent to the inner disk grows the probe disk faster than X1 moves
    away from the annulus.  ``full_exterior`` checks this instead of
    assuming it, sweeping centers at distance ``s * (1+2a)`` for each
    ``s`` in ``exterior_scales`` with radius ``s * (1+2a) - 1``.
    """
    _check_a(a)
    if int(L) != L or L < 1:
        raise DomainError(f"L must be a positive integer, got {L}")
    L = int(L)
    lm = l_max(a)
    if L > lm:
        raise InfeasibleTrapError(f"L={L} exceeds l_max({a})={lm}")
    if num_angles < 1:
        raise DomainError("num_angles must be >= 1")
    angles = _probe_angles(L, num_angles, 0.0)
    R = 1.0 + 2.0 * a
    scales = exterior_scales if full_exterior else (1.0,)
    for s in scales:
        dist = _probe_distances(a, L, angles, s * R)
        reach = s * R - 1.0 - a / 2.0  # probe radius minus sub-disk radius
        if np.any(dist > reach + CERT_TOL):
            return False
    return True


def numeric_l_min(a: float, num_angles: int = 2048) -> int:
    """Smallest L <= l_max(a) whose trap passes the containment certificate."""
    for L in range(1, l_max(a) + 1):
        if containment_certificate(a, L, num_angles):
            return L
    raise CertificateError(f"no L <= l_max({a}) = {l_max(a)} passes the containment certificate")
