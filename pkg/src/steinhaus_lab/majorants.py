"""Poisson kernel analytics and the explicit step-function majorant psi.

``psi = sum_n K_n v_n chi_{I_n}`` where I_n is the arc of half-length
1 - |lambda_n| centred at lambda_n/|lambda_n| and K_n = 1/omega(lambda_n, I_n).
Since P[chi_I](z) is the harmonic measure of I at z (closed form), P[psi]
is evaluated exactly and its own term already reproduces v_n at lambda_n;
every other term is nonnegative.  That is what :func:`certify_majorant`
checks point by point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .blaschke import PhiLambdaTable
from .geometry import (
    TWO_PI,
    BoundaryArc,
    PointLike,
    as_disk,
    harmonic_measure_polar,
)
from .quadrature import DEFAULT_RTOL, MAX_NODES, QuadResult, graded_breakpoints, integrate
from .rng import generator

CERTIFICATE_TOL = 1e-9


def _polar(z: PointLike):
    z = as_disk(z)
    r = abs(z)
    return 1.0 - r, (math.atan2(z.imag, z.real) if r > 0 else 0.0)


def _poisson(gap, phi, angle):
    # (1 - r^2) / |e^{i angle} - z|^2 with |e^{it} - z|^2 = gap^2 + 4 r sin^2((t - phi)/2)
    s = np.sin(0.5 * (np.asarray(angle) - phi))
    return gap * (2.0 - gap) / (gap * gap + 4.0 * (1.0 - gap) * s * s)


def poisson_kernel(z: PointLike, angle) -> float:
    gap, phi = _polar(z)
    out = _poisson(gap, phi, angle)
    return float(out) if np.ndim(out) == 0 else out


def poisson_lq_norm(z: PointLike, q: float, rtol: float = DEFAULT_RTOL) -> QuadResult:
    """Integral over T of P_z^q dm (the q-th power of the L^q norm).

    The kernel is even about arg z, so the integral is folded onto [0, pi]
    with panels graded down to width (1 - |z|)/64 at the peak.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    gap, _ = _polar(z)
    if q == 1:
        return QuadResult(1.0, 0.0, 0, True)
    bp = graded_breakpoints(0.0, gap / 64.0, 0.0, math.pi)
    res = integrate(lambda t: _poisson(gap, 0.0, t) ** q, bp, rtol=rtol)
    return QuadResult(res.value / math.pi, res.error / math.pi, res.nodes, res.converged)


def lq_band_product(z: PointLike, q: float) -> float:
    """(1 - |z|)^(q-1) * ||P_z||_q^q, bounded above and below independently of z."""
    gap, _ = _polar(z)
    return gap ** (q - 1.0) * poisson_lq_norm(z, q).value


# ---------------------------------------------------------------------------
# measures in the disk and their balayage


@dataclass(frozen=True)
class DiscreteMeasure:
    """sum_k weight_k delta_{point_k} with positive weights."""

    points: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        pts = tuple(as_disk(z) for z in self.points)
        w = tuple(float(x) for x in self.weights)
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if any(not x > 0 for x in w):
            raise ValueError("measure weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, tuple(w * factor for w in self.weights))

    def _polar_arrays(self):
        p = np.array(self.points, dtype=complex)
        return 1.0 - np.abs(p), np.angle(p), np.array(self.weights)


def balayage(mu: DiscreteMeasure, angle):
    """B mu at e^{i angle}: sum_k weight_k P_{point_k}(angle)."""
    if len(mu) == 0:
        return 0.0 * np.asarray(angle, dtype=float)
    gap, phi, w = mu._polar_arrays()
    a = np.asarray(angle, dtype=float)
    vals = _poisson(gap[:, None], phi[:, None], a.reshape(1, -1)) * w[:, None]
    out = vals.sum(axis=0).reshape(a.shape)
    return float(out) if out.ndim == 0 else out


def balayage_lq_norm(mu: DiscreteMeasure, q: float, rtol: float = DEFAULT_RTOL) -> QuadResult:
    """||B mu||_{L^q} by adaptive quadrature graded at every atom."""
    if len(mu) == 0:
        return QuadResult(0.0, 0.0, 0, True)
    gap, phi, w = mu._polar_arrays()
    bp = {0.0, TWO_PI}
    for g, t in zip(gap, np.mod(phi, TWO_PI)):
        for shift in (-TWO_PI, 0.0, TWO_PI):
            bp.update(x for x in graded_breakpoints(t + shift, g / 16.0, 0.0, TWO_PI) if 0.0 <= x <= TWO_PI)

    def f(t):
        flat = t.ravel()
        vals = (_poisson(gap[:, None], phi[:, None], flat[None, :]) * w[:, None]).sum(axis=0)
        return (vals**q).reshape(t.shape)

    res = integrate(f, sorted(bp), rtol=rtol)
    integral = res.value / TWO_PI
    norm = integral ** (1.0 / q)
    err = norm * (res.error / TWO_PI) / (q * integral) if integral > 0 else 0.0
    return QuadResult(norm, err, res.nodes, res.converged)


@dataclass(frozen=True)
class AlphaLambdaReport:
    q: float
    norm: float  # ||B mu||_q
    s: Optional[float]  # sum alpha^q (1 - |lambda|)^(1 - q), when norm <= 1
    atom_bound: float  # max over atoms of 1 / band product: S never exceeds it when norm <= 1
    quad_error: float

    @property
    def within_bound(self) -> bool:
        return self.s is not None and self.s <= self.atom_bound * (1.0 + 1e-7)


def alpha_lambda_check(mu: DiscreteMeasure, q: float, norm_slack: float = 1e-9) -> AlphaLambdaReport:
    """Compute ||B mu||_q and, if it is at most 1, S = sum alpha^q (1-|lambda|)^(1-q)."""
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    if len(mu) == 0:
        return AlphaLambdaReport(q, 0.0, 0.0, 0.0, 0.0)
    nr = balayage_lq_norm(mu, q)
    gap, _, w = mu._polar_arrays()
    bands = np.array([lq_band_product(z, q) for z in mu.points])
    bound = float(np.max(1.0 / bands))
    s = None
    if nr.value <= 1.0 + norm_slack:
        s = math.fsum(w**q * gap ** (1.0 - q))
    return AlphaLambdaReport(q, nr.value, s, bound, nr.error)


def normalize_measure(mu: DiscreteMeasure, q: float) -> DiscreteMeasure:
    """Rescale weights so that ||B mu||_q = 1 (B is linear in the weights)."""
    return mu.scaled(1.0 / balayage_lq_norm(mu, q).value)


def random_measure(seed: int, index: int, atoms: int = 5) -> DiscreteMeasure:
    """Atoms at radii 1 - 10^-u, u ~ U(0.3, 4), uniform angles, weights U(0.1, 1)."""
    rng = generator(seed, "alpha-lambda", index)
    u = rng.uniform(0.3, 4.0, atoms)
    theta = rng.uniform(0.0, TWO_PI, atoms)
    w = rng.uniform(0.1, 1.0, atoms)
    pts = (1.0 - 10.0**-u) * np.exp(1j * theta)
    return DiscreteMeasure(tuple(pts), tuple(w))


@dataclass(frozen=True)
class AlphaLambdaBattery:
    q: float
    reports: tuple

    @property
    def empirical_c(self) -> float:
        return max(r.s for r in self.reports)


def alpha_lambda_battery(q: float, count: int = 100, atoms: int = 5, seed: int = 0) -> AlphaLambdaBattery:
    reports = []
    for i in range(count):
        mu = normalize_measure(random_measure(seed, i, atoms), q)
        reports.append(alpha_lambda_check(mu, q, norm_slack=1e-7))
    return AlphaLambdaBattery(q, tuple(reports))


# ---------------------------------------------------------------------------
# step functions on T


@dataclass(frozen=True, eq=False)
class StepFunction:
    """sum_k weight_k chi_{arc_k}; ``source`` maps terms back to table rows."""

    center: np.ndarray
    half: np.ndarray
    weight: np.ndarray
    source: Optional[np.ndarray] = None
    k: Optional[np.ndarray] = None  # per-term 1/omega normalisation, when built by build_psi

    @classmethod
    def from_terms(cls, terms: Sequence) -> "StepFunction":
        """From ``[(BoundaryArc, weight), ...]``."""
        if any(w < 0 for _, w in terms):
            raise ValueError("step function weights must be nonnegative")
        c = np.array([a.center_angle for a, _ in terms], dtype=float)
        h = np.array([a.half_length for a, _ in terms], dtype=float)
        w = np.array([w for _, w in terms], dtype=float)
        return cls(c, h, w)

    def __len__(self) -> int:
        return len(self.weight)

    @property
    def terms(self):
        return [(BoundaryArc(float(c), float(h)), float(w)) for c, h, w in zip(self.center, self.half, self.weight)]

    def __call__(self, angle):
        a = np.asarray(angle, dtype=float)
        d = np.abs(np.mod(a.reshape(-1, 1) - self.center[None, :] + math.pi, TWO_PI) - math.pi)
        inside = (d < self.half[None, :]) | (self.half[None, :] >= math.pi)
        out = (inside * self.weight[None, :]).sum(axis=1).reshape(a.shape)
        return float(out) if out.ndim == 0 else out

    def l1_norm(self) -> float:
        """Exact by linearity: sum weight * m(arc), overlaps included."""
        return math.fsum(self.weight * np.minimum(self.half, math.pi) / math.pi)

    def lp_norm(self, p: float) -> float:
        if p == 1:
            return self.l1_norm()
        return self.lp_power(p) ** (1.0 / p)

    def lp_power(self, p: float) -> float:
        """Integral of psi^p dm by sorting arc endpoints (no sampling).

        Endpoints are kept as (base, offset) pairs so arcs far narrower than
        the float spacing of their centre angle keep their exact length.
        """
        full = self.half >= math.pi
        base0 = math.fsum(self.weight[full])
        c = np.mod(self.center[~full], TWO_PI)
        h = self.half[~full]
        w = self.weight[~full]
        ev_base, ev_off, ev_dw = [0.0, TWO_PI], [0.0, 0.0], [0.0, 0.0]

        def add(b, o, dw):
            ev_base.extend(b)
            ev_off.extend(o)
            ev_dw.extend(dw)

        lo = c - h < 0.0
        hi = c + h > TWO_PI
        mid = ~(lo | hi)
        add(c[mid], -h[mid], w[mid])
        add(c[mid], h[mid], -w[mid])
        # arcs crossing angle 0 are cut there
        add(c[lo] + TWO_PI, -h[lo], w[lo])
        add(np.full(lo.sum(), TWO_PI), np.zeros(lo.sum()), -w[lo])
        add(np.zeros(lo.sum()), np.zeros(lo.sum()), w[lo])
        add(c[lo], h[lo], -w[lo])
        add(c[hi], -h[hi], w[hi])
        add(np.full(hi.sum(), TWO_PI), np.zeros(hi.sum()), -w[hi])
        add(np.zeros(hi.sum()), np.zeros(hi.sum()), w[hi])
        add(c[hi] - TWO_PI, h[hi], -w[hi])

        base = np.array(ev_base, dtype=float)
        off = np.array(ev_off, dtype=float)
        dw = np.array(ev_dw, dtype=float)
        order = np.lexsort((off, base, base + off))
        base, off, dw = base[order], off[order], dw[order]
        length = np.where(base[1:] == base[:-1], off[1:] - off[:-1], (base[1:] - base[:-1]) + (off[1:] - off[:-1]))
        level = np.maximum(base0 + np.cumsum(dw)[:-1], 0.0)
        length = np.maximum(length, 0.0)
        return math.fsum(level**p * length) / TWO_PI


def build_psi(table: PhiLambdaTable) -> StepFunction:
    """psi = sum K_n v_n chi_{I_n} over the points with v_n > 0.

    I_n is centred at arg lambda_n with half-length 1 - |lambda_n|; the
    origin gets the whole circle with K = 1.
    """
    if table.has_duplicates:
        raise ValueError("cannot build psi from a table with duplicate points")
    keep = np.nonzero(table.value > 0)[0]
    gap = table.gap[keep]
    if np.any(gap <= 0.0):
        raise ValueError("points closer to T than the float range; majorant needs representable gaps")
    theta = np.mod(table.theta[keep], TWO_PI)
    origin = gap >= 1.0
    half = np.where(origin, math.pi, np.minimum(gap, math.pi))
    omega_self = harmonic_measure_polar(gap, theta, theta, half)
    k = np.where(origin, 1.0, 1.0 / omega_self)
    weight = table.value[keep] / np.where(origin, 1.0, omega_self)
    return StepFunction(theta, half, weight, source=keep, k=k)


def poisson_extension_polar(psi: StepFunction, gap, phi, block: int = 512) -> np.ndarray:
    """P[psi] at the points (1 - gap) e^{i phi}, exactly (no quadrature)."""
    gap = np.atleast_1d(np.asarray(gap, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    out = np.empty(len(gap))
    for i in range(0, len(gap), block):
        sl = slice(i, i + block)
        om = harmonic_measure_polar(gap[sl, None], phi[sl, None], psi.center[None, :], psi.half[None, :])
        out[sl] = om @ psi.weight
    return out


def poisson_extension_step(psi: StepFunction, z: PointLike) -> float:
    gap, phi = _polar(z)
    if len(psi) == 0:
        return 0.0
    return float(poisson_extension_polar(psi, gap, phi)[0])


def sup_k(psi: StepFunction, table: PhiLambdaTable) -> float:
    """Largest factor K_n m(I_n) pi / (1 - |lambda_n|) over the terms.

    Equals K_n away from the origin; a point at the origin contributes pi.
    With it, ||psi||_1 <= sup_k * X_1 / pi holds term by term.
    """
    if len(psi) == 0:
        return 0.0
    gap = table.gap[psi.source]
    factor = psi.k * np.minimum(psi.half, math.pi) / gap
    return float(np.max(factor))


@dataclass
class MajorantCertificate:
    margins: np.ndarray
    psi_l1: float
    psi_lp: float
    p: float
    sup_K: float
    tolerance: float = CERTIFICATE_TOL
    x1: float = float("nan")

    @property
    def valid(self) -> bool:
        return bool(len(self.margins) == 0 or np.min(self.margins) >= -self.tolerance)

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins)) if len(self.margins) else 0.0

    @property
    def l1_bound_holds(self) -> bool:
        """||psi||_1 <= sup_K X_1 / pi (up to rounding)."""
        bound = self.sup_K * self.x1 / math.pi
        return self.psi_l1 <= bound * (1.0 + 1e-12) + 1e-300

    def to_dict(self) -> dict:
        return {
            "margins": [float(m) for m in self.margins],
            "psi_l1": self.psi_l1,
            "psi_lp": self.psi_lp,
            "p": self.p,
            "sup_K": self.sup_K,
            "valid": self.valid,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def certify_majorant(
    table: PhiLambdaTable,
    psi: Optional[StepFunction] = None,
    p: float = 2.0,
    tol: float = CERTIFICATE_TOL,
) -> MajorantCertificate:
    """Margins P[psi](lambda_n) - v_n at every point, plus the norms of psi."""
    from .blaschke import criterion_sum

    if psi is None:
        psi = build_psi(table)
    n = len(table)
    if n == 0:
        return MajorantCertificate(np.empty(0), 0.0, 0.0, p, 0.0, tol, 0.0)
    if np.any(table.gap <= 0.0):
        raise ValueError("points closer to T than the float range; majorant needs representable gaps")
    margins = np.empty(n)
    block = 256
    own = np.full(n, -1)
    if psi.source is not None:
        own[psi.source] = np.arange(len(psi))
    for i in range(0, n, block):
        sl = slice(i, min(n, i + block))
        rows = np.arange(sl.start, sl.stop)
        om = harmonic_measure_polar(
            table.gap[sl, None], table.theta[sl, None], psi.center[None, :], psi.half[None, :]
        )
        contrib = om * psi.weight[None, :]
        mine = own[sl]
        has = mine >= 0
        # own term: weight*omega reproduces v_n up to rounding; subtract it there
        self_part = np.zeros(len(rows))
        self_part[has] = contrib[np.nonzero(has)[0], mine[has]] - table.value[sl][has]
        contrib[np.nonzero(has)[0], mine[has]] = 0.0
        others = np.array([math.fsum(row) for row in contrib])
        margins[sl] = others + self_part - np.where(has, 0.0, table.value[sl])
    return MajorantCertificate(
        margins=margins,
        psi_l1=psi.l1_norm(),
        psi_lp=psi.lp_norm(p),
        p=p,
        sup_K=sup_k(psi, table) if psi.source is not None else float("nan"),
        tolerance=tol,
        x1=criterion_sum(table, 1.0),
    )
