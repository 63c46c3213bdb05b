"""Pseudohyperbolic geometry of the unit disk.

Two layers live here.  The scalar layer works on ordinary points
(``complex`` or :class:`DiskPoint`) and is what most callers want.  The
polar layer works on arrays of ``(log_gap, theta)`` where
``log_gap = log(1 - |z|)``; it keeps full relative precision for points
arbitrarily close to the circle (radii such as ``1 - 2**-2000`` that do
not exist as floats), and is what the sequence code builds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

TWO_PI = 2.0 * math.pi
LOG2 = math.log(2.0)
LOG4 = math.log(4.0)


class DiskError(ValueError):
    """A point was supplied on or outside the unit circle."""


@dataclass(frozen=True)
class DiskPoint:
    re: float
    im: float

    def __post_init__(self):
        if not (self.re * self.re + self.im * self.im < 1.0):
            raise DiskError(f"({self.re}, {self.im}) is not inside the unit disk")

    @classmethod
    def from_polar(cls, r: float, theta: float) -> "DiskPoint":
        return cls(r * math.cos(theta), r * math.sin(theta))

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    @property
    def modulus(self) -> float:
        return math.hypot(self.re, self.im)


PointLike = Union[complex, float, DiskPoint]


def as_disk(z: PointLike) -> complex:
    """Coerce to ``complex`` and reject anything not strictly inside D."""
    w = complex(z)
    if not abs(w) < 1.0:
        raise DiskError(f"{w!r} is not inside the unit disk")
    return w


@dataclass(frozen=True)
class BoundaryArc:
    """Arc of T centred at ``exp(i*center_angle)`` with the given half-length."""

    center_angle: float
    half_length: float

    def __post_init__(self):
        if not (0.0 < self.half_length <= math.pi):
            raise ValueError(f"half_length must lie in (0, pi], got {self.half_length}")

    @property
    def measure(self) -> float:
        """Normalized Lebesgue measure (total mass of T is 1)."""
        return self.half_length / math.pi

    @property
    def is_full(self) -> bool:
        return self.half_length >= math.pi


@dataclass(frozen=True)
class StolzAngle:
    vertex_angle: float
    aperture: float

    def __post_init__(self):
        if not self.aperture > 1.0:
            raise ValueError(f"Stolz aperture must exceed 1, got {self.aperture}")


@dataclass(frozen=True)
class DyadicAnnulus:
    """``{z : 1 - 2**-n <= |z| < 1 - 2**-(n+1)}``."""

    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("annulus index must be nonnegative")

    @property
    def inner_radius(self) -> float:
        return 1.0 - 2.0 ** -self.index

    @property
    def outer_radius(self) -> float:
        return 1.0 - 2.0 ** -(self.index + 1)

    def contains(self, z: PointLike) -> bool:
        return annulus_index(z) == self.index


# ---------------------------------------------------------------------------
# scalar layer


def _one_minus_sq(z: complex) -> float:
    a = abs(z)
    return (1.0 - a) * (1.0 + a)


def pseudo_distance(a: PointLike, b: PointLike) -> float:
    """rho(a, b) = |(a - b) / (1 - conj(a) b)|."""
    a, b = as_disk(a), as_disk(b)
    d2 = abs(a - b) ** 2
    if d2 == 0.0:
        return 0.0
    # |1 - conj(a) b|^2 = |a - b|^2 + (1 - |a|^2)(1 - |b|^2)
    den = d2 + _one_minus_sq(a) * _one_minus_sq(b)
    return math.sqrt(d2 / den)


def log_inv_rho(a: PointLike, b: PointLike) -> float:
    """log(1/rho(a, b)), ``inf`` when the points coincide.

    Uses ``log(1/rho) = 0.5*log1p((1-|a|^2)(1-|b|^2) / |a-b|^2)``, which has
    no cancellation as rho -> 1 or rho -> 0.
    """
    a, b = as_disk(a), as_disk(b)
    d2 = abs(a - b) ** 2
    if d2 == 0.0:
        return math.inf
    return 0.5 * math.log1p(_one_minus_sq(a) * _one_minus_sq(b) / d2)


def mobius(c: PointLike, z: PointLike) -> complex:
    """phi_c(z) = (z - c) / (1 - conj(c) z)."""
    c, z = as_disk(c), as_disk(z)
    return (z - c) / (1.0 - c.conjugate() * z)


def blaschke_factor(center: PointLike, z: PointLike) -> complex:
    """Normalized Blaschke factor b_center(z); b_0(z) = z."""
    lam, z = as_disk(center), as_disk(z)
    if lam == 0:
        return z
    return (abs(lam) / lam) * (z - lam) / (1.0 - lam.conjugate() * z)


def _annulus_from_gap(gap: float) -> int:
    m, e = math.frexp(gap)  # gap = m * 2**e, m in [0.5, 1)
    return -e + (1 if m == 0.5 else 0)


def annulus_index(z: PointLike) -> int:
    """Index n of the dyadic annulus containing z."""
    return _annulus_from_gap(1.0 - abs(as_disk(z)))


def stolz_contains(angle: StolzAngle, z: PointLike) -> bool:
    z = as_disk(z)
    zeta = complex(math.cos(angle.vertex_angle), math.sin(angle.vertex_angle))
    return abs(zeta - z) <= angle.aperture * (1.0 - abs(z))


def harmonic_measure(z: PointLike, arc: BoundaryArc) -> float:
    """Poisson integral at z of the indicator of ``arc`` (exact closed form)."""
    z = as_disk(z)
    r = abs(z)
    phi = math.atan2(z.imag, z.real) if r > 0 else 0.0
    return float(harmonic_measure_polar(1.0 - r, phi, arc.center_angle, arc.half_length))


# ---------------------------------------------------------------------------
# polar layer (arrays of log gaps and angles)


def wrap_angle(t):
    """Reduce angles to [-pi, pi)."""
    return np.mod(np.asarray(t, dtype=float) + math.pi, TWO_PI) - math.pi


def annulus_indices(gap, log_gap=None):
    """Vectorized annulus index from ``1 - r``.

    Exact (via ``frexp``) wherever the gap is a representable float; gaps
    that underflowed to zero fall back to ``log_gap``.
    """
    gap = np.asarray(gap, dtype=float)
    m, e = np.frexp(gap)
    idx = (-e + (m == 0.5)).astype(np.int64)
    if log_gap is None:
        return idx
    with np.errstate(invalid="ignore"):
        deep = np.floor(-np.asarray(log_gap, dtype=float) / LOG2)
    return np.where(gap == 0.0, deep, idx).astype(np.int64)


def _log_abs_gap_diff(lg_a, lg_b):
    """log|exp(lg_a) - exp(lg_b)|, -inf when equal."""
    hi = np.maximum(lg_a, lg_b)
    lo = np.minimum(lg_a, lg_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = hi + np.log(-np.expm1(lo - hi))
    return np.where(hi == lo, -np.inf, out)


def log_ratio_polar(lg_a, th_a, lg_b, th_b):
    """x = log[(1-|a|^2)(1-|b|^2) / |a-b|^2] for points in polar-gap form.

    ``log(1/rho) = 0.5*log1p(exp(x))``.  Everything stays in log form so
    gaps below the float range are handled.
    """
    lg_a = np.asarray(lg_a, dtype=float)
    lg_b = np.asarray(lg_b, dtype=float)
    ga = np.exp(lg_a)
    gb = np.exp(lg_b)
    log_d = lg_a + np.log(2.0 - ga) + lg_b + np.log(2.0 - gb)
    with np.errstate(divide="ignore"):
        radial = 2.0 * _log_abs_gap_diff(lg_a, lg_b)
        sin_half = np.abs(np.sin(0.5 * (np.asarray(th_a) - np.asarray(th_b))))
        angular = LOG4 + np.log1p(-ga) + np.log1p(-gb) + 2.0 * np.log(sin_half)
        log_d2 = np.logaddexp(radial, angular)
        return log_d - log_d2


def softplus(x):
    return np.logaddexp(0.0, x)


def log_softplus(x):
    """log(log1p(exp(x))) without underflow for very negative x."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        small = x + np.log1p(-0.5 * np.exp(np.minimum(x, -30.0)))
        big = np.log(softplus(np.maximum(x, -30.0)))
    return np.where(x < -30.0, small, big)


def log_inv_rho_polar(lg_a, th_a, lg_b, th_b):
    """Vectorized log(1/rho) in polar-gap form (``inf`` for coincident points)."""
    return 0.5 * softplus(log_ratio_polar(lg_a, th_a, lg_b, th_b))


def loglog_inv_rho_polar(lg_a, th_a, lg_b, th_b):
    """log(log(1/rho)); finite even when log(1/rho) itself underflows."""
    return -LOG2 + log_softplus(log_ratio_polar(lg_a, th_a, lg_b, th_b))


def _arc_piece(gap, v1, v2, sin_half):
    # Poisson integral over the angles (v1, v2) ⊂ [-pi, pi] measured from the
    # point's own argument: atan2(k sin h, c1 c2 + k^2 s1 s2)/pi with
    # k = (1+r)/(1-r), rescaled so nothing under- or overflows.
    s1, c1 = np.sin(0.5 * v1), np.cos(0.5 * v1)
    s2, c2 = np.sin(0.5 * v2), np.cos(0.5 * v2)
    scale = np.maximum(np.maximum(gap, np.abs(s1)), np.abs(s2))
    g = gap / scale
    two_minus = 2.0 - gap
    num = g * two_minus * (sin_half / scale)
    den = g * g * c1 * c2 + two_minus * two_minus * (s1 / scale) * (s2 / scale)
    return np.arctan2(num, den) / math.pi


def harmonic_measure_polar(gap, phi, center, half_length):
    """Harmonic measure at ``(1 - gap) e^{i phi}`` of the arc (center, half_length).

    Broadcasts over all arguments.  ``gap`` must be positive.  Arcs with
    half-length >= pi are the whole circle.
    """
    gap, phi, center, half_length = np.broadcast_arrays(
        np.asarray(gap, dtype=float),
        np.asarray(phi, dtype=float),
        np.asarray(center, dtype=float),
        np.asarray(half_length, dtype=float),
    )
    if np.any(gap <= 0.0):
        raise DiskError("harmonic measure needs points strictly inside the disk")
    t = wrap_angle(center - phi)
    u1 = t - half_length
    u2 = t + half_length
    low = u1 < -math.pi
    high = u2 > math.pi
    split = low | high

    # unsplit arcs use sin(h) directly: keeps tiny arcs exact
    out = _arc_piece(gap, u1, u2, np.sin(half_length))
    if np.any(split):
        a1 = np.where(low, u1 + TWO_PI, u1)
        b1 = np.full_like(a1, math.pi)
        a2 = np.full_like(a1, -math.pi)
        b2 = np.where(low, u2, u2 - TWO_PI)
        # only the split entries are meaningful here
        p1 = _arc_piece(gap, a1, b1, np.sin(0.5 * (b1 - a1)))
        p2 = _arc_piece(gap, a2, b2, np.sin(0.5 * (b2 - a2)))
        out = np.where(split, p1 + p2, out)
    out = np.where(half_length >= math.pi, 1.0, out)
    return np.clip(out, 0.0, 1.0)


def stolz_contains_polar(gap, phi, vertex, aperture):
    """Vectorized Stolz membership: |zeta - z| <= alpha (1 - |z|)."""
    gap = np.asarray(gap, dtype=float)
    sin_half = np.sin(0.5 * (np.asarray(phi) - np.asarray(vertex)))
    # |zeta - z|^2 = gap^2 + 4 r sin^2(dphi/2)
    return 4.0 * (1.0 - gap) * sin_half * sin_half <= (aperture * aperture - 1.0) * gap * gap
