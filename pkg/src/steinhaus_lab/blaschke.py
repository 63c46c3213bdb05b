"""Blaschke products with one factor removed, evaluated on the sequence.

For a sample Lambda = (lambda_n) the central quantity is

    v_n = log 1/|B_n(lambda_n)| = sum_{m != n} log 1/rho(lambda_n, lambda_m),

computed pairwise in O(N^2).  Two representations are kept: ``value`` (a
float, summed with ``math.fsum`` so it is exactly invariant under
reordering) and ``log_value`` (its logarithm via log-sum-exp, finite even
when v_n itself underflows for points within 2^-1000 of the circle).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special

from .geometry import log_ratio_polar, log_softplus, softplus, LOG2
from .sequences import SequenceSample

BLOCK_ROWS = 256


def _block_kernel(sample: SequenceSample, rows: slice, cols: slice):
    """(L, LL) for a block: log(1/rho) and log(log(1/rho)), diagonal masked out."""
    lg, th = sample.log_gap, sample.theta
    x = log_ratio_polar(lg[rows, None], th[rows, None], lg[None, cols], th[None, cols])
    L = 0.5 * softplus(x)
    LL = -LOG2 + log_softplus(x)
    r0, r1 = rows.start, rows.stop
    c0, c1 = cols.start, cols.stop
    lo, hi = max(r0, c0), min(r1, c1)
    if lo < hi:
        k = np.arange(lo, hi)
        L[k - r0, k - c0] = 0.0
        LL[k - r0, k - c0] = -np.inf
    return L, LL


def _row_blocks(n: int, size: int = BLOCK_ROWS):
    return [slice(i, min(n, i + size)) for i in range(0, n, size)]


_logsumexp = special.logsumexp


def logsumexp(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return -math.inf
    return float(_logsumexp(v))


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True, eq=False)
class PhiLambdaTable:
    """Per-point values log 1/|B_n(lambda_n)| of a finite sample."""

    gap: np.ndarray
    log_gap: np.ndarray
    theta: np.ndarray
    value: np.ndarray
    log_value: np.ndarray
    max_pair: float  # largest single log(1/rho); inf iff there is a duplicate

    def __len__(self) -> int:
        return len(self.value)

    @property
    def has_duplicates(self) -> bool:
        return bool(np.any(np.isinf(self.value)))

    @property
    def finite(self) -> bool:
        return not self.has_duplicates

    @property
    def radii(self) -> np.ndarray:
        return 1.0 - self.gap

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "r", "theta", "log_inv_B"])
        for n, (r, t, v) in enumerate(zip(self.radii, self.theta, self.value)):
            w.writerow([n, repr(float(r)), repr(float(t)), repr(float(v))])
        return buf.getvalue()


def _phi_rows(sample: SequenceSample, rows: slice):
    L, LL = _block_kernel(sample, rows, slice(0, len(sample)))
    values = np.array([math.fsum(row) for row in L])
    return values, _logsumexp(LL, axis=1), float(np.max(L)) if L.size else 0.0


def phi_lambda(sample: SequenceSample, workers: int = 1) -> PhiLambdaTable:
    """All N values log 1/|B_n(lambda_n)|; ``inf`` entries flag duplicate points.

    Row blocks may be spread over threads; each row is reduced with
    ``math.fsum`` so the result does not depend on ``workers``.
    """
    n = len(sample)
    blocks = _row_blocks(n)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda b: _phi_rows(sample, b), blocks))
    else:
        parts = [_phi_rows(sample, b) for b in blocks]
    if parts:
        value = np.concatenate([p[0] for p in parts])
        log_value = np.concatenate([p[1] for p in parts])
        max_pair = max(p[2] for p in parts)
    else:
        value = log_value = np.empty(0)
        max_pair = 0.0
    if n == 1:
        log_value = np.array([-np.inf])
    return PhiLambdaTable(sample.gap, sample.log_gap, sample.theta, value, log_value, max_pair)


def criterion_sum(table: PhiLambdaTable, p: float) -> float:
    """X_p = sum (1 - |lambda_n|) v_n^p."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if table.has_duplicates:
        return math.inf
    return math.fsum(table.gap * table.value**p)


def log_criterion_sum(table: PhiLambdaTable, p: float) -> float:
    """log X_p, usable when X_p underflows."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if table.has_duplicates:
        return math.inf
    return logsumexp(table.log_gap + p * table.log_value)


def naftalevic_sup(table: PhiLambdaTable) -> float:
    """sup_n (1 - |lambda_n|) v_n over the truncation."""
    if len(table) == 0:
        return 0.0
    if table.has_duplicates:
        return math.inf
    return float(np.max(table.gap * table.value))


@dataclass(frozen=True)
class SeparationReport:
    weak: float
    strong: float
    degenerate: bool = False


def separation(sample: SequenceSample, table: Optional[PhiLambdaTable] = None) -> SeparationReport:
    """Weak (min rho) and strong (min prod rho) separation of the truncation."""
    if len(sample) < 2:
        return SeparationReport(1.0, 1.0, degenerate=True)
    if table is None:
        table = phi_lambda(sample)
    weak = math.exp(-table.max_pair)
    strong = math.exp(-float(np.max(table.value)))
    return SeparationReport(weak, strong)


# ---------------------------------------------------------------------------
# truncation checkpoints


def segment_log_sums(sample: SequenceSample, boundaries: Sequence[int], workers: int = 1) -> np.ndarray:
    """S[n, j] = log sum_{m in [b_j, b_{j+1}), m != n} log 1/rho(lambda_n, lambda_m).

    Only the log-of-log kernel is used, so nothing underflows.  ``boundaries``
    must start at 0 and end at ``len(sample)``.
    """
    n = len(sample)
    b = list(boundaries)
    if b[0] != 0 or b[-1] != n or sorted(b) != b:
        raise ValueError("boundaries must increase from 0 to len(sample)")

    def rows(block):
        _, LL = _block_kernel(sample, block, slice(0, n))
        return np.stack([_logsumexp(LL[:, b[j]:b[j + 1]], axis=1) for j in range(len(b) - 1)], axis=1)

    blocks = _row_blocks(n)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(rows, blocks))
    else:
        parts = [rows(blk) for blk in blocks]
    return np.concatenate(parts, axis=0) if parts else np.empty((0, len(b) - 1))


def log_pow_increment(log_base, log_delta, p: float):
    """log((b + d)^p - b^p) from log b and log d, elementwise."""
    log_base = np.asarray(log_base, dtype=float)
    log_delta = np.asarray(log_delta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        y = log_delta - log_base
        # tiny relative increment: (b+d)^p - b^p ~ p b^(p-1) d
        small = math.log(p) + log_delta + (p - 1.0) * log_base + np.log1p(0.5 * (p - 1.0) * np.exp(np.minimum(y, -30.0)))
        x = p * softplus(np.maximum(y, -30.0))
        big = p * log_base + x + np.log(-np.expm1(-x))
    out = np.where(y < -30.0, small, big)
    out = np.where(np.isneginf(log_base), p * log_delta, out)
    return np.where(np.isneginf(log_delta), -np.inf, out)


@dataclass(frozen=True)
class Checkpoints:
    """X_p at prefix truncations of one sample, all in log form."""

    truncations: tuple  # N values (including halves)
    p: float
    log_x: dict  # N -> log X_p(N)
    log_increment: dict  # N -> log(X_p(N) - X_p(N/2)) for requested N

    def x(self, N: int) -> float:
        return math.exp(self.log_x[N])

    def increment(self, N: int) -> float:
        return math.exp(self.log_increment[N])


def checkpoint_sums(sample: SequenceSample, checkpoints: Iterable[int], ps: Sequence[float], workers: int = 1):
    """For each p, log X_p(N) and log(X_p(N) - X_p(N//2)) at each checkpoint N.

    The truncation to N points is the prefix of the sample, matching how a
    longer sample with the same seed extends a shorter one.
    """
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if checkpoints and checkpoints[-1] > len(sample):
        raise ValueError("checkpoint beyond the sample length")
    cuts = sorted({0} | {c for c in checkpoints} | {c // 2 for c in checkpoints} | {len(sample)})
    S = segment_log_sums(sample, cuts, workers)
    lg = sample.log_gap
    pos = {c: i for i, c in enumerate(cuts)}

    def log_v(T):
        # v_n(T) for n < T
        return _logsumexp(S[:T, : pos[T]], axis=1) if pos[T] else np.full(T, -np.inf)

    out = []
    for p in ps:
        log_x = {}
        for T in cuts[1:]:
            lv = log_v(T)
            log_x[T] = logsumexp(lg[:T] + p * lv)
        incr = {}
        for N in checkpoints:
            M = N // 2
            if M == 0:
                incr[N] = log_x.get(N, -math.inf)
                continue
            lv_m = log_v(M)
            log_delta = _logsumexp(S[:M, pos[M]:pos[N]], axis=1)
            old = lg[:M] + log_pow_increment(lv_m, log_delta, p)
            new = lg[M:N] + p * log_v(N)[M:N]
            incr[N] = logsumexp(np.concatenate([old, new]))
        log_x.setdefault(0, -math.inf)
        out.append(Checkpoints(tuple(cuts), float(p), log_x, incr))
    return out
