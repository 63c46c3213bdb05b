"""End-to-end interpolation verdicts, Stolz-angle coverage, and the radial pair construction."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .blaschke import (
    PhiLambdaTable,
    checkpoint_sums,
    criterion_sum,
    naftalevic_sup,
    phi_lambda,
    separation,
)
from .geometry import TWO_PI, stolz_contains_polar
from .majorants import certify_majorant
from .sequences import SequenceSample

# ---------------------------------------------------------------------------
# per-sample report


@dataclass
class CriterionReport:
    n_points: int
    blaschke_sum: float
    tail_convergent: Optional[bool]
    x_p: dict  # p -> X_p on the truncation
    increments_decay: dict  # p -> X_p(N) - X_p(N/2) < X_p(N/2) - X_p(N/4)
    naftalevic_sup: float
    weak_separation: float
    strong_separation: float
    certificate: dict  # summary, or {"certifiable": False, "reason": ...}
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x_p"] = {_pkey(p): v for p, v in self.x_p.items()}
        d["increments_decay"] = {_pkey(p): v for p, v in self.increments_decay.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)

    @property
    def all_positive(self) -> bool:
        return all(self.verdicts.values())


def _pkey(p) -> str:
    return repr(float(p))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serializable: {type(x)}")


def canonical_order(sample: SequenceSample) -> SequenceSample:
    """Points sorted by decreasing distance to T, ties by angle; removes order dependence."""
    order = np.lexsort((np.mod(sample.theta, TWO_PI), -sample.log_gap))
    return sample.subset(order)


def _increments_decay(sample: SequenceSample, ps) -> dict:
    n = len(sample)
    if n < 8:
        return {p: True for p in ps}
    cps = [n // 4, n // 2, n]
    out = {}
    for p, cp in zip(ps, checkpoint_sums(sample, cps, ps)):
        a, b = cp.log_increment[n // 2], cp.log_increment[n]
        out[p] = bool(b < a or (math.isinf(a) and math.isinf(b) and a < 0 and b < 0))
    return out


def _certificate_summary(table: PhiLambdaTable, p: float) -> dict:
    if len(table) and table.has_duplicates:
        return {"certifiable": False, "reason": "duplicate points"}
    if np.any(table.gap <= 0.0):
        return {"certifiable": False, "reason": "points closer to T than float resolution"}
    cert = certify_majorant(table, p=p)
    return {
        "certifiable": True,
        "valid": cert.valid,
        "min_margin": cert.min_margin,
        "psi_l1": cert.psi_l1,
        "psi_lp": cert.psi_lp,
        "p": cert.p,
        "sup_K": cert.sup_K,
        "l1_bound_holds": cert.l1_bound_holds,
    }


def evaluate_criteria(sample: SequenceSample, p_list: Sequence[float] = (2.0,), workers: int = 1) -> CriterionReport:
    """Blaschke sum, X_p, Naftalevic sup, separation and a majorant certificate.

    Verdicts: ``blaschke`` (profile tail convergent, or a finite list),
    ``H_p=<p>`` (finite X_p whose increments over the last doubling shrink),
    ``H_p=<p> certified`` (the above plus a valid certificate) and
    ``smirnov`` (finite X_1 plus a valid certificate).
    """
    ps = [float(p) for p in p_list]
    tail = sample.profile.tail_convergent if sample.profile is not None else True
    sample = canonical_order(sample)
    table = phi_lambda(sample, workers=workers)
    bsum = math.fsum(sample.gap)
    all_ps = sorted(set(ps) | {1.0})
    x = {p: criterion_sum(table, p) for p in all_ps}
    finite = table.finite
    decay = _increments_decay(sample, all_ps) if finite else {p: False for p in all_ps}
    sep = separation(sample, table)
    cert = _certificate_summary(table, ps[0] if ps else 2.0)
    valid = bool(cert.get("certifiable") and cert.get("valid"))
    verdicts = {"blaschke": bool(tail)}
    for p in ps:
        ok = math.isfinite(x[p]) and decay[p]
        verdicts[f"H_p={_pkey(p)}"] = bool(ok)
        verdicts[f"H_p={_pkey(p)} certified"] = bool(ok and valid)
    verdicts["smirnov"] = bool(math.isfinite(x[1.0]) and valid)
    return CriterionReport(
        n_points=len(sample),
        blaschke_sum=bsum,
        tail_convergent=tail,
        x_p={p: x[p] for p in ps},
        increments_decay={p: decay[p] for p in ps},
        naftalevic_sup=naftalevic_sup(table),
        weak_separation=0.0 if not finite else sep.weak,
        strong_separation=0.0 if not finite else sep.strong,
        certificate=cert,
        verdicts=verdicts,
    )


# ---------------------------------------------------------------------------
# Stolz-angle coverage


@dataclass(frozen=True)
class StolzCoverReport:
    K: int
    alpha: float
    vertices: tuple  # chosen vertex angles, in selection order
    covered_fraction: float
    n_points: int
    coverage_by_step: tuple = ()  # covered fraction after each pick

    @property
    def uncovered_fraction(self) -> float:
        return 1.0 - self.covered_fraction

    def to_dict(self) -> dict:
        return asdict(self)


def stolz_cover_greedy(sample: SequenceSample, K: int, alpha: float, M: int = 720) -> StolzCoverReport:
    """Greedy choice of K Stolz angles (vertices on an M-point grid) covering most points.

    Each step adds the vertex with the largest number of newly covered
    points; ties go to the smallest angle.  The selection for K is a prefix
    of the selection for K + 1, so coverage is non-decreasing in K.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if not alpha > 1.0:
        raise ValueError(f"aperture must exceed 1, got {alpha}")
    if M < 1:
        raise ValueError("need at least one candidate vertex")
    n = len(sample)
    if n == 0:
        return StolzCoverReport(K, alpha, (), 1.0, 0)
    verts = TWO_PI * np.arange(M) / M
    cover = stolz_contains_polar(sample.gap[:, None], sample.theta[:, None], verts[None, :], alpha)
    covered = np.zeros(n, dtype=bool)
    chosen, steps = [], []
    for _ in range(K):
        gain = (cover & ~covered[:, None]).sum(axis=0)
        j = int(np.argmax(gain))
        chosen.append(float(verts[j]))
        covered |= cover[:, j]
        steps.append(float(covered.sum()) / n)
    return StolzCoverReport(K, float(alpha), tuple(chosen), float(covered.sum()) / n, n, tuple(steps))


def expected_level_coverage(level: int, K: int, alpha: float) -> float:
    """Upper bound on the share of the circle |z| = 1 - 2^-level inside K Stolz angles.

    A point at distance gap from T with angular offset x from the vertex is
    inside iff 4 r sin^2(x/2) <= (alpha^2 - 1) gap^2; with |x| <= pi |sin(x/2)|
    this confines x to |x| < pi alpha gap / (2 sqrt(r)).
    """
    if level == 0:
        return min(1.0, float(K))
    gap = 2.0**-level
    return min(1.0, K * alpha * gap / (2.0 * math.sqrt(1.0 - gap)))


# ---------------------------------------------------------------------------
# radial pairs at prescribed pseudo-distance


@dataclass(frozen=True)
class CarlesonRow:
    n: int
    r: float  # 1 - 2^-n
    s_log_gap: float  # log(s - r) for the companion s
    log_rho: float  # log rho(r, s) recomputed from the companion
    logB_lower: float  # n 2^n
    harnack_ceiling: float  # 2 * 2^n
    naftalevic_product: float  # 2^-n * n 2^n

    @property
    def target_log_rho(self) -> float:
        return -float(self.n * 2**self.n)

    @property
    def ratio_to_ceiling(self) -> float:
        return self.logB_lower / self.harnack_ceiling


CARLESON_COLUMNS = ["n", "r", "s_log_gap", "logB_lower", "harnack_ceiling", "naftalevic_product"]
CARLESON_N_MAX = 40


def carleson_row(n: int) -> CarlesonRow:
    """Companion s on the radius through r = 1 - 2^-n with rho(r, s) = exp(-n 2^n).

    s = (r + eps) / (1 + r eps) with eps = exp(-n 2^n) is held only through
    logarithms: s - r = eps (1 - r^2) / (1 + r eps) and
    1 - s = (1 - r)(1 - eps) / (1 + r eps).
    """
    if not 1 <= n <= CARLESON_N_MAX:
        raise ValueError(f"n must lie in 1..{CARLESON_N_MAX}, got {n}")
    k = n * 2**n
    log_eps = -float(k)
    eps = math.exp(log_eps)  # underflows to 0 from n = 8 on; only enters through log1p
    gap_r = math.ldexp(1.0, -n)
    r = 1.0 - gap_r
    log_one_minus_r2 = math.log(gap_r) + math.log1p(r)
    s_log_gap = log_eps + log_one_minus_r2 - math.log1p(r * eps)
    # 1 - r s = (1 - r) + r (1 - s), built from the companion's own gap
    log_gap_s = math.log(gap_r) + math.log1p(-eps) - math.log1p(r * eps)
    log_one_minus_rs = math.log(gap_r + r * math.exp(log_gap_s))
    log_rho = s_log_gap - log_one_minus_rs
    logb = float(k)
    return CarlesonRow(
        n=n,
        r=r,
        s_log_gap=s_log_gap,
        log_rho=log_rho,
        logB_lower=logb,
        harnack_ceiling=math.ldexp(2.0, n),
        naftalevic_product=gap_r * logb,
    )


@dataclass(frozen=True)
class CarlesonTable:
    rows: tuple

    def __len__(self) -> int:
        return len(self.rows)

    def naftalevic_sup(self) -> float:
        return max((row.naftalevic_product for row in self.rows), default=0.0)

    def max_log_rho_relative_error(self) -> float:
        return max(abs(row.log_rho - row.target_log_rho) / abs(row.target_log_rho) for row in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CARLESON_COLUMNS)
        for row in self.rows:
            w.writerow([row.n, repr(row.r), repr(row.s_log_gap), repr(row.logB_lower),
                        repr(row.harnack_ceiling), repr(row.naftalevic_product)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([asdict(row) for row in self.rows], sort_keys=True)


def carleson_counterexample(n_max: int = 20) -> CarlesonTable:
    if not 1 <= n_max <= CARLESON_N_MAX:
        raise ValueError(f"n_max must lie in 1..{CARLESON_N_MAX}, got {n_max}")
    return CarlesonTable(tuple(carleson_row(n) for n in range(1, n_max + 1)))
