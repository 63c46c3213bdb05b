"""Radius profiles and Steinhaus random sequences.

A sample keeps, per point, the exact gap ``1 - r`` (a float that may
underflow to 0 for profiles such as geometric q=1/2 with thousands of
points), ``log(1 - r)`` (always finite) and the angle.  Radii themselves are
only a convenience view.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .geometry import annulus_indices, as_disk
from .rng import check_seed, uniform_angles

DYADIC_OFFSET = 0.75  # dyadic profiles place points at 1 - (3/4) 2^-n


class ProfileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# dyadic count rules


@dataclass(frozen=True)
class CountRule:
    """Per-annulus counts N_n.  ``text`` is the grammar form it was parsed from."""

    text: str
    func: Callable[[int], int] = field(compare=False, repr=False)
    convergent: bool = True
    levels: Optional[int] = None  # finite explicit lists

    def __call__(self, n: int) -> int:
        return self.func(n)


def parse_counts(text: str) -> CountRule:
    """``n`` | ``n^k`` | ``2^n`` | integer K | ``a;b;c`` (explicit N_0, N_1, ...)."""
    text = text.strip()
    if text == "n":
        return CountRule(text, lambda n: n)
    m = re.fullmatch(r"n\^(\d+)", text)
    if m:
        k = int(m.group(1))
        return CountRule(text, lambda n: n**k)
    if text == "2^n":
        # sum N_n 2^-n = sum 1 diverges
        return CountRule(text, lambda n: 2**n, convergent=False)
    if re.fullmatch(r"\d+", text):
        k = int(text)
        return CountRule(text, lambda n: k)
    if ";" in text or re.fullmatch(r"[\d;]+", text):
        vals = [int(v) for v in text.split(";") if v != ""]
        if any(v < 0 for v in vals):
            raise ProfileError("dyadic counts must be nonnegative")
        return CountRule(text, lambda n: vals[n] if n < len(vals) else 0, levels=len(vals))
    raise ProfileError(f"unknown dyadic count rule {text!r}")


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class RadiusProfile:
    """A radius sequence truncated to ``count`` points.

    ``kind`` is one of ``geometric`` (q), ``power`` (c, beta), ``dyadic``
    (counts) or ``explicit`` (radii).
    """

    kind: str
    count: int
    q: Optional[float] = None
    c: float = 1.0
    beta: Optional[float] = None
    counts: Optional[CountRule] = None
    radii: Optional[tuple] = None

    def __post_init__(self):
        if self.count < 0:
            raise ProfileError("count must be nonnegative")
        if self.kind == "geometric":
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ProfileError(f"geometric profile needs q in (0,1), got {self.q}")
        elif self.kind == "power":
            if self.beta is None or not self.beta > 0:
                raise ProfileError(f"power profile needs beta > 0, got {self.beta}")
            if not self.c > 0:
                raise ProfileError(f"power profile needs c > 0, got {self.c}")
        elif self.kind == "dyadic":
            if self.counts is None:
                raise ProfileError("dyadic profile needs a count rule")
        elif self.kind == "explicit":
            if self.radii is None:
                raise ProfileError("explicit profile needs radii")
            if any(not 0.0 <= r < 1.0 for r in self.radii):
                raise ProfileError("explicit radii must lie in [0, 1)")
        else:
            raise ProfileError(f"unknown profile kind {self.kind!r}")

    # constructors ---------------------------------------------------------

    @classmethod
    def geometric(cls, q: float, count: int) -> "RadiusProfile":
        return cls("geometric", count, q=q)

    @classmethod
    def power(cls, beta: float, count: int, c: float = 1.0) -> "RadiusProfile":
        return cls("power", count, c=c, beta=beta)

    @classmethod
    def dyadic(cls, counts, count: int) -> "RadiusProfile":
        rule = counts if isinstance(counts, CountRule) else parse_counts(str(counts))
        return cls("dyadic", count, counts=rule)

    @classmethod
    def explicit(cls, radii: Sequence[float]) -> "RadiusProfile":
        radii = tuple(sorted(float(r) for r in radii))
        return cls("explicit", len(radii), radii=radii)

    def with_count(self, count: int) -> "RadiusProfile":
        if self.kind == "explicit":
            return RadiusProfile.explicit(self.radii[:count])
        return RadiusProfile(self.kind, count, self.q, self.c, self.beta, self.counts)

    @property
    def tail_convergent(self) -> bool:
        """Whether the untruncated sequence satisfies the Blaschke condition."""
        if self.kind == "geometric":
            return True
        if self.kind == "power":
            return self.beta > 1.0
        if self.kind == "dyadic":
            return self.counts.convergent
        return True  # finite list

    def spec_string(self) -> str:
        if self.kind == "geometric":
            return f"geometric:q={self.q!r},N={self.count}"
        if self.kind == "power":
            return f"power:c={self.c!r},beta={self.beta!r},N={self.count}"
        if self.kind == "dyadic":
            return f"dyadic:counts={self.counts.text},N={self.count}"
        return f"explicit:N={self.count}"

    def _dyadic_levels(self):
        """Annulus level of each point, in order, for the first ``count`` points."""
        levels = []
        n = 0
        empty_run = 0
        while len(levels) < self.count:
            k = self.counts(n)
            levels.extend([n] * min(k, self.count - len(levels)))
            empty_run = empty_run + 1 if k == 0 else 0
            if self.counts.levels is not None and n >= self.counts.levels:
                break
            if empty_run > 4096:
                break
            n += 1
        return levels

    def gaps(self):
        """``(gap, log_gap)`` arrays for 1 - r_n, sorted by decreasing gap."""
        N = self.count
        if self.kind == "geometric":
            n = np.arange(1, N + 1, dtype=float)
            gap = self.q**n
            log_gap = n * math.log(self.q)
        elif self.kind == "power":
            n = np.arange(1, N + 1, dtype=float)
            log_gap = np.minimum(0.0, math.log(self.c) - self.beta * np.log(n))
            gap = np.minimum(1.0, self.c * n**-self.beta)
        elif self.kind == "dyadic":
            lv = np.array(self._dyadic_levels(), dtype=float)
            gap = DYADIC_OFFSET * 2.0**-lv
            log_gap = math.log(DYADIC_OFFSET) - lv * math.log(2.0)
        else:
            r = np.array(self.radii, dtype=float)
            gap = 1.0 - r
            log_gap = np.log1p(-r)
        # prefer the exact logarithm where the gap is representable
        with np.errstate(divide="ignore"):
            log_gap = np.where(gap > 0, np.log(np.where(gap > 0, gap, 1.0)), log_gap)
        order = np.argsort(-log_gap, kind="stable")
        return gap[order], log_gap[order]


def make_radii(profile: RadiusProfile) -> np.ndarray:
    """Radii of the profile, sorted non-decreasing (deep points round to 1.0)."""
    gap, _ = profile.gaps()
    return 1.0 - gap


def parse_profile(spec: str) -> RadiusProfile:
    """Parse ``geometric:q=0.5,N=200``, ``power:c=1,beta=2,N=500``,
    ``dyadic:counts=n,N=140`` or ``explicit:file=radii.csv``."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ProfileError(f"malformed profile parameter {item!r}")
        params[key.strip()] = value.strip()

    def take(name, conv, default=None):
        if name in params:
            try:
                return conv(params.pop(name))
            except ValueError as exc:
                raise ProfileError(f"bad value for {name}: {exc}") from None
        if default is None:
            raise ProfileError(f"{kind} profile requires {name}")
        return default

    if kind == "geometric":
        prof = RadiusProfile.geometric(take("q", float), take("N", int))
    elif kind == "power":
        c = take("c", float, 1.0)
        prof = RadiusProfile.power(take("beta", float), take("N", int), c=c)
    elif kind == "dyadic":
        prof = RadiusProfile.dyadic(take("counts", str), take("N", int))
    elif kind == "explicit":
        path = Path(take("file", str))
        radii = [float(line) for line in path.read_text().split() if line.strip()]
        prof = RadiusProfile.explicit(radii)
        if "N" in params:
            prof = prof.with_count(take("N", int))
    else:
        raise ProfileError(f"unknown profile kind {kind!r}")
    if params:
        raise ProfileError(f"unknown profile parameters: {sorted(params)}")
    return prof


# ---------------------------------------------------------------------------
# Blaschke accounting


@dataclass(frozen=True)
class BlaschkeSum:
    value: float
    tail_convergent: bool


def blaschke_sum(radii, tail_convergent: Optional[bool] = None) -> BlaschkeSum:
    """Sum of 1 - r over the truncation.

    ``radii`` may be a :class:`RadiusProfile` (then the tail flag comes from
    the profile) or a plain sequence of radii.
    """
    if isinstance(radii, RadiusProfile):
        gap, _ = radii.gaps()
        return BlaschkeSum(math.fsum(gap), radii.tail_convergent)
    r = np.asarray(radii, dtype=float)
    if np.any((r < 0) | (r >= 1)):
        raise ProfileError("radii must lie in [0, 1)")
    return BlaschkeSum(math.fsum(1.0 - r), True if tail_convergent is None else tail_convergent)


def tail_sum(profile: RadiusProfile, n: int):
    """Sum over m > n of (1 - r_m) for the *untruncated* profile (1-based n).

    Exact ``Fraction`` for geometric profiles; float otherwise.
    """
    if profile.kind == "geometric":
        q = Fraction(profile.q)
        return q ** (n + 1) / (1 - q)
    if profile.kind == "power":
        if profile.beta <= 1.0:
            return math.inf
        # clamping only affects the first terms, which are never in a tail
        # once c * m^-beta <= 1
        m0 = n + 1
        head = 0.0
        while profile.c * m0 ** -profile.beta > 1.0:
            head += 1.0
            m0 += 1
        return head + profile.c * float(zeta(profile.beta, m0))
    if profile.kind == "dyadic":
        if not profile.counts.convergent:
            return math.inf
        gaps = []
        lvl = 0
        finite = profile.counts.levels
        while len(gaps) < n and (finite is None or lvl < finite):
            gaps.extend([DYADIC_OFFSET * 2.0**-lvl] * profile.counts(lvl))
            lvl += 1
        total = math.fsum(gaps[n:])
        while True:
            k = profile.counts(lvl)
            term = k * DYADIC_OFFSET * 2.0**-lvl
            total += term
            if lvl > 60 and term < 1e-300:
                return total
            if profile.counts.levels is not None and lvl >= profile.counts.levels:
                return total
            lvl += 1
    gap, _ = profile.gaps()
    return math.fsum(gap[n:])


def driver_terms(profile: RadiusProfile, n: int):
    """(n - 1)(1 - r_n) and the tail sum after n; exact for geometric profiles."""
    if profile.kind == "geometric":
        q = Fraction(profile.q)
        return (n - 1) * q**n, tail_sum(profile, n)
    gap, _ = profile.with_count(max(n, profile.count)).gaps()
    return (n - 1) * float(gap[n - 1]), tail_sum(profile, n)


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True, eq=False)
class SequenceSample:
    """A realization r_n e^{i theta_n}.  Arrays are read-only."""

    profile: Optional[RadiusProfile]
    seed: Optional[int]
    gap: np.ndarray
    log_gap: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        for name in ("gap", "log_gap", "theta"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.gap) == len(self.log_gap) == len(self.theta)):
            raise ValueError("gap, log_gap and theta must have equal length")

    def __len__(self) -> int:
        return len(self.theta)

    @property
    def count(self) -> int:
        return len(self.theta)

    @property
    def radii(self) -> np.ndarray:
        return 1.0 - self.gap

    @property
    def points(self) -> np.ndarray:
        """Complex coordinates (lossy for points closer to T than 1e-16)."""
        return self.radii * np.exp(1j * self.theta)

    def prefix(self, n: int) -> "SequenceSample":
        prof = self.profile.with_count(n) if self.profile is not None else None
        return SequenceSample(prof, self.seed, self.gap[:n], self.log_gap[:n], self.theta[:n])

    def subset(self, index) -> "SequenceSample":
        index = np.asarray(index)
        return SequenceSample(None, self.seed, self.gap[index], self.log_gap[index], self.theta[index])

    def rotated(self, alpha: float) -> "SequenceSample":
        return SequenceSample(self.profile, self.seed, self.gap, self.log_gap, self.theta + alpha)

    def with_angles(self, theta) -> "SequenceSample":
        theta = np.broadcast_to(np.asarray(theta, dtype=float), self.theta.shape)
        return SequenceSample(self.profile, None, self.gap, self.log_gap, theta)

    def concat(self, other: "SequenceSample") -> "SequenceSample":
        return SequenceSample(
            None,
            None,
            np.concatenate([self.gap, other.gap]),
            np.concatenate([self.log_gap, other.log_gap]),
            np.concatenate([self.theta, other.theta]),
        )

    @classmethod
    def from_points(cls, points) -> "SequenceSample":
        pts = [as_disk(z) for z in points]
        r = np.array([abs(z) for z in pts], dtype=float)
        theta = np.array([math.atan2(z.imag, z.real) if z != 0 else 0.0 for z in pts])
        gap = 1.0 - r
        return cls(None, None, gap, np.log(gap), theta)

    @classmethod
    def from_polar(cls, radii, theta) -> "SequenceSample":
        r = np.asarray(radii, dtype=float)
        if np.any((r < 0) | (r >= 1)):
            raise ProfileError("radii must lie in [0, 1)")
        gap = 1.0 - r
        return cls(None, None, gap, np.log(gap), np.broadcast_to(theta, r.shape))

    @classmethod
    def empty(cls) -> "SequenceSample":
        return cls(None, None, np.empty(0), np.empty(0), np.empty(0))


def sample_sequence(profile: RadiusProfile, seed: int) -> SequenceSample:
    """Draw theta_n i.i.d. uniform on [0, 2pi) from the counter-based angle stream.

    The first k angles depend only on ``seed``, so a sample of N points is a
    prefix of the sample of 2N points with the same seed.
    """
    seed = check_seed(seed)
    gap, log_gap = profile.gaps()
    theta = uniform_angles(seed, len(gap))
    return SequenceSample(profile, seed, gap, log_gap, theta)


# ---------------------------------------------------------------------------
# dyadic counting


@dataclass(frozen=True)
class DyadicProfile:
    counts: dict
    weighted_sum: float  # sum N_n 2^-n
    blaschke_sum: float  # sum (1 - r)
    lower: float  # 0.5 * weighted_sum
    upper: float  # weighted_sum

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def comparable(self) -> bool:
        """Annulus endpoint bounds 2^-(n+1) < 1 - r <= 2^-n, summed."""
        return self.lower <= self.blaschke_sum <= self.upper


def dyadic_counts(sample: SequenceSample) -> DyadicProfile:
    if len(sample) == 0:
        return DyadicProfile({}, 0.0, 0.0, 0.0, 0.0)
    idx = annulus_indices(sample.gap, sample.log_gap)
    levels, counts = np.unique(idx, return_counts=True)
    table = {int(n): int(k) for n, k in zip(levels, counts)}
    weighted = math.fsum(k * 2.0 ** -n for n, k in table.items())
    return DyadicProfile(table, weighted, math.fsum(sample.gap), 0.5 * weighted, weighted)
