"""Expectation estimates for random rotations and the moment batteries built on them.

For lambda = r e^{i t1}, mu = s e^{i t2} with independent uniform angles,
log 1/rho(lambda, mu) depends only on t1 - t2, so every expectation here is
the one-dimensional average over theta in [0, pi] of

    f(theta) = [ 1/2 log(1 + (1-r^2)(1-s^2) / ((r-s)^2 + 4 r s sin^2(theta/2))) ]^p,

which is finite except for a logarithmic spike at theta = 0 when r = s.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .blaschke import checkpoint_sums, logsumexp
from .geometry import annulus_index
from .quadrature import DEFAULT_RTOL, graded_breakpoints, integrate
from .rng import generator, uniform_words
from .sequences import RadiusProfile, driver_terms, sample_sequence

MC_SIGMAS = 3.0
BAND = 10.0
CSV_COLUMNS = ["lemma", "p", "r", "s", "method", "estimate", "error", "bound_ref", "ratio", "pass"]


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    std_error: float
    n_samples: int
    method: str
    achieved_error: float

    @property
    def error(self) -> float:
        return self.std_error if self.method == "monte_carlo" else self.achieved_error


@dataclass(frozen=True)
class LemmaVerdict:
    """``passed`` iff every entry of ``ratios`` is at most ``bound_constant``.

    ``rows`` carries the per-point detail in the CSV schema.
    """

    lemma: str
    grid: str
    ratios: tuple
    bound_constant: float
    rows: tuple = ()
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(math.isfinite(x) and x <= self.bound_constant for x in self.ratios)

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k, "")) for k in CSV_COLUMNS})
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return x


# ---------------------------------------------------------------------------
# E[log^p 1/rho]


def _check_rs(r: float, s: float, p: float):
    if not (0.0 <= r < 1.0 and 0.0 <= s < 1.0):
        raise ValueError(f"radii must lie in [0, 1), got r={r}, s={s}")
    if not p >= 1.0:
        raise ValueError(f"p must be >= 1, got {p}")


def _logp_integrand(r: float, s: float, p: float):
    num = (1.0 - r * r) * (1.0 - s * s)
    diff2 = (r - s) ** 2
    four_rs = 4.0 * r * s

    def f(theta):
        sh = np.sin(0.5 * theta)
        with np.errstate(divide="ignore"):
            val = 0.5 * np.log1p(num / (diff2 + four_rs * sh * sh))
        return val**p

    return f


def expect_logp_rho(
    r: float,
    s: float,
    p: float = 1.0,
    method: str = "quadrature",
    n: int = 10**6,
    tol: float = DEFAULT_RTOL,
    seed: int = 0,
) -> EstimatorResult:
    """E[log^p 1/rho(r e^{i t1}, s e^{i t2})] over independent uniform angles."""
    _check_rs(r, s, p)
    if method not in ("quadrature", "monte_carlo"):
        raise ValueError(f"unknown method {method!r}")
    if r == 0.0 or s == 0.0:
        # rho is the other modulus, identically
        other = max(r, s)
        val = math.inf if other == 0.0 else (-math.log(other)) ** p
        return EstimatorResult(val, 0.0, 0 if method == "quadrature" else n, method, 0.0)
    f = _logp_integrand(r, s, p)
    if method == "monte_carlo":
        theta = math.pi * uniform_words(seed, n, "logp-rho")
        vals = f(theta)
        se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return EstimatorResult(float(np.mean(vals)), se, n, method, se)
    finest = min(1.0 - r, 1.0 - s) ** 2 * 1e-4
    bp = graded_breakpoints(0.0, finest, 0.0, math.pi)
    res = integrate(f, bp, rtol=tol)
    return EstimatorResult(res.value / math.pi, 0.0, res.nodes, method, res.error / math.pi)


def cochran_check(grid: Sequence[tuple] = None, tol: float = 1e-7) -> LemmaVerdict:
    """|E[log rho] - max(log r, log s)| by quadrature, against ``tol``."""
    if grid is None:
        grid = [(r, s) for r in (0.5, 0.9, 0.99) for s in (0.5, 0.9, 0.99)]
    rows, devs = [], []
    for r, s in grid:
        est = expect_logp_rho(r, s, 1.0)
        exact = -max(math.log(r) if r > 0 else -math.inf, math.log(s) if s > 0 else -math.inf)
        dev = abs(est.mean - exact)
        devs.append(dev)
        rows.append(dict(lemma="cochran", p=1.0, r=float(r), s=float(s), method="quadrature",
                         estimate=est.mean, error=est.error, bound_ref=tol, ratio=dev, **{"pass": dev < tol}))
    return LemmaVerdict("cochran", f"{len(grid)} (r,s) pairs", tuple(devs), tol, tuple(rows))


def cochran_mc_check(grid: Sequence[tuple] = None, n: int = 10**6, seed: int = 0) -> LemmaVerdict:
    """Monte Carlo against the exact value; ratios are |error| / std_error, bound 3."""
    if grid is None:
        grid = [(r, s) for r in (0.5, 0.9, 0.99) for s in (0.5, 0.9, 0.99)]
    rows, z = [], []
    for i, (r, s) in enumerate(grid):
        est = expect_logp_rho(r, s, 1.0, method="monte_carlo", n=n, seed=_task_seed(seed, i))
        exact = -math.log(max(r, s))
        score = abs(est.mean - exact) / est.std_error if est.std_error > 0 else abs(est.mean - exact)
        z.append(score)
        rows.append(dict(lemma="cochran", p=1.0, r=float(r), s=float(s), method="monte_carlo",
                         estimate=est.mean, error=est.std_error, bound_ref=MC_SIGMAS, ratio=score,
                         **{"pass": score <= MC_SIGMAS}))
    return LemmaVerdict("cochran-mc", f"{len(grid)} (r,s) pairs, n={n}", tuple(z), MC_SIGMAS, tuple(rows))


def _task_seed(seed: int, index: int) -> int:
    """Per-task 64-bit seed derived from the master seed."""
    return int(generator(seed, "task", index).integers(0, 2**63))


def _band_verdict(lemma, grid, rows, band=BAND) -> LemmaVerdict:
    """Spread max/min of ``ratio`` within each ``family`` of rows; one spread per family."""
    families = {}
    for row in rows:
        families.setdefault(row["family"], []).append(row["ratio"])
    spreads, notes = {}, {}
    for key, vals in families.items():
        vals = np.asarray(vals, dtype=float)
        ok = np.all(vals > 0) and np.all(np.isfinite(vals))
        spreads[key] = float(vals.max() / vals.min()) if ok else math.inf
        notes[f"spread[{key}]"] = spreads[key]
    allv = np.array([row["ratio"] for row in rows], dtype=float)
    notes["pooled_spread"] = float(allv.max() / allv.min()) if np.all(allv > 0) else math.inf
    notes["max_ratio"] = float(allv.max())
    marked = tuple(
        {**{k: v for k, v in row.items() if k != "family"}, "pass": bool(spreads[row["family"]] <= band)}
        for row in rows
    )
    return LemmaVerdict(lemma, grid, tuple(spreads.values()), band, marked, notes)


DIAGONAL_R_GRID = (0.9, 0.99, 0.999, 0.9999)
COMPANIONS = (0.5, 1.0, 2.0)


def diagonal_bound_check(p: float, r_grid: Sequence[float] = DIAGONAL_R_GRID,
                         companions: Sequence[float] = COMPANIONS, tol: float = DEFAULT_RTOL,
                         band: float = BAND) -> LemmaVerdict:
    """E/(1 - r^2) with 1 - s = c (1 - r); one band check per companion factor c.

    ``ratios`` are the max/min spreads of each family over the r-grid.
    """
    if any(not 0.5 <= r < 1.0 for r in r_grid):
        raise ValueError("diagonal grid radii must lie in [1/2, 1)")
    rows = []
    for c in companions:
        for r in r_grid:
            s = 1.0 - c * (1.0 - r)
            est = expect_logp_rho(r, s, p, tol=tol)
            ratio = est.mean / (1.0 - r * r)
            rows.append(dict(lemma="diagonal", p=float(p), r=float(r), s=float(s), method="quadrature",
                             estimate=est.mean, error=est.error, bound_ref=1.0 - r * r, ratio=ratio,
                             family=f"c={c}"))
    return _band_verdict("diagonal", f"r in {list(r_grid)}, 1-s = c(1-r), c in {list(companions)}", rows, band)


def offdiagonal_pairs(gaps: Sequence[int] = range(2, 9), max_level: int = 12):
    """(r, s, gap) with r = 1 - 2^-j (r = 0 for j = 0) and s = 1 - 2^-(j+gap)."""
    out = []
    for g in gaps:
        for j in range(0, max_level - g + 1):
            out.append((1.0 - 2.0**-j if j else 0.0, 1.0 - 2.0 ** -(j + g), g))
    return out


def offdiagonal_bound_check(p: float, pairs: Optional[Sequence[tuple]] = None, tol: float = DEFAULT_RTOL,
                            band: float = BAND) -> LemmaVerdict:
    """E/min(1-r, 1-s) for pairs in annuli at least two apart; bands per annulus gap."""
    if pairs is None:
        pairs = offdiagonal_pairs()
    rows = []
    for r, s, *rest in pairs:
        g = rest[0] if rest else abs(annulus_index(s) - annulus_index(r))
        if abs(annulus_index(s) - annulus_index(r)) < 2:
            raise ValueError(f"pair ({r}, {s}) is not two annuli apart; use the diagonal check")
        est = expect_logp_rho(r, s, p, tol=tol)
        ref = min(1.0 - r, 1.0 - s)
        ratio = est.mean / ref
        rows.append(dict(lemma="offdiagonal", p=float(p), r=float(r), s=float(s), method="quadrature",
                         estimate=est.mean, error=est.error, bound_ref=ref, ratio=ratio, family=f"gap={g}"))
    return _band_verdict("offdiagonal", f"{len(pairs)} pairs in annuli 2..8 apart", rows, band)


# ---------------------------------------------------------------------------
# Rosenthal battery


@dataclass(frozen=True)
class Distribution:
    """Nonnegative distributions: exponential(rate), lognormal(mu, sigma), constant(c), logrho(r, s, scale)."""

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("exponential", "lognormal", "constant", "logrho"):
            raise ValueError(f"unknown distribution {self.kind!r}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "exponential":
            (rate,) = self.params
            return rng.exponential(1.0 / rate, shape)
        if self.kind == "lognormal":
            mu, sigma = self.params
            return rng.lognormal(mu, sigma, shape)
        if self.kind == "constant":
            (c,) = self.params
            return np.full(shape, float(c))
        r, s, scale = self.params
        theta = rng.uniform(0.0, math.pi, shape)
        return scale * _logp_integrand(r, s, 1.0)(theta)

    def moment(self, p: float) -> Optional[float]:
        """Closed-form E[X^p] where one exists."""
        if self.kind == "exponential":
            (rate,) = self.params
            return math.exp(gammaln(p + 1.0)) / rate**p
        if self.kind == "lognormal":
            mu, sigma = self.params
            return math.exp(p * mu + 0.5 * p * p * sigma * sigma)
        if self.kind == "constant":
            return float(self.params[0]) ** p
        return None

    def sum_moment(self, k: int, p: float) -> Optional[float]:
        """Closed-form E[(X_1 + ... + X_k)^p] where one exists."""
        if self.kind == "exponential":
            (rate,) = self.params
            return math.exp(gammaln(k + p) - gammaln(k)) / rate**p
        if self.kind == "constant":
            return (k * float(self.params[0])) ** p
        if k == 1:
            return self.moment(p)
        return None


def parse_distribution(text: str) -> Distribution:
    """``exponential:1``, ``lognormal:0,0.5``, ``constant:2``, ``logrho:0.9,0.95,1``."""
    kind, _, rest = text.partition(":")
    params = tuple(float(x) for x in rest.split(",") if x.strip())
    defaults = {"exponential": (1.0,), "lognormal": (0.0, 0.5), "constant": (1.0,), "logrho": (0.9, 0.95, 1.0)}
    if kind not in defaults:
        raise ValueError(f"unknown distribution {kind!r}")
    return Distribution(kind, params or defaults[kind])


@dataclass(frozen=True)
class RosenthalResult:
    distribution: Distribution
    k: int
    p: float
    lhs: EstimatorResult
    rhs: EstimatorResult
    closed_form_lhs: Optional[float]

    @property
    def margin_sigmas(self) -> float:
        return MC_SIGMAS

    @property
    def combined_error(self) -> float:
        return math.hypot(self.lhs.std_error, self.rhs.std_error)

    @property
    def bound_holds(self) -> bool:
        return self.lhs.mean <= self.rhs.mean + MC_SIGMAS * self.combined_error

    @property
    def oracle_z(self) -> Optional[float]:
        if self.closed_form_lhs is None:
            return None
        if self.lhs.std_error == 0.0:
            return 0.0 if math.isclose(self.lhs.mean, self.closed_form_lhs, rel_tol=1e-12) else math.inf
        return abs(self.lhs.mean - self.closed_form_lhs) / self.lhs.std_error

    @property
    def oracle_agrees(self) -> bool:
        z = self.oracle_z
        return z is None or z <= MC_SIGMAS

    @property
    def finite(self) -> bool:
        return all(math.isfinite(x) for x in (self.lhs.mean, self.lhs.std_error, self.rhs.mean, self.rhs.std_error))

    @property
    def passed(self) -> bool:
        return self.finite and self.bound_holds and self.oracle_agrees


def rosenthal_check(dist: Distribution, k: int, p: float, n: int = 200_000, seed: int = 0) -> RosenthalResult:
    """Monte Carlo for E[(sum X_m)^p] and 2^{p^2} max(sum E X^p, (sum E X)^p)."""
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    if not 1 <= k <= 64:
        raise ValueError(f"k must lie in 1..64, got {k}")
    rng = generator(seed, f"rosenthal:{dist.kind}:{k}:{p}")
    x = dist.sample(rng, (n, k))
    sums = x.sum(axis=1)
    lhs_vals = sums**p
    lhs = EstimatorResult(float(lhs_vals.mean()), float(lhs_vals.std(ddof=1) / math.sqrt(n)), n, "monte_carlo", 0.0)
    flat = x.ravel()
    m = flat.size
    xp = flat**p
    mom_p = float(xp.mean())
    se_p = float(xp.std(ddof=1) / math.sqrt(m))
    mean = float(flat.mean())
    se_mean = float(flat.std(ddof=1) / math.sqrt(m))
    c = 2.0 ** (p * p)
    a, sa = k * mom_p, k * se_p
    b, sb = (k * mean) ** p, p * (k * mean) ** (p - 1.0) * k * se_mean
    core, se_core = (a, sa) if a >= b else (b, sb)
    rhs = EstimatorResult(c * core, c * se_core, n, "monte_carlo", 0.0)
    return RosenthalResult(dist, k, p, lhs, rhs, dist.sum_moment(k, p))


ROSENTHAL_DISTRIBUTIONS = (Distribution("exponential", (1.0,)), Distribution("lognormal", (0.0, 0.5)))


def rosenthal_battery(dists: Sequence[Distribution] = ROSENTHAL_DISTRIBUTIONS, ks: Sequence[int] = (2, 16, 64),
                      ps: Sequence[float] = (1.5, 2.0, 3.0), n: int = 200_000, seed: int = 0) -> LemmaVerdict:
    """``ratios`` are LHS / (RHS + 3 sigma); all must be at most 1."""
    rows, ratios, results = [], [], []
    i = 0
    for d in dists:
        for k in ks:
            for p in ps:
                res = rosenthal_check(d, k, p, n=n, seed=_task_seed(seed, i))
                i += 1
                results.append(res)
                ceiling = res.rhs.mean + MC_SIGMAS * res.combined_error
                ratio = res.lhs.mean / ceiling if res.passed else math.inf
                ratios.append(ratio)
                rows.append(dict(lemma=f"rosenthal:{d.kind}:k={k}", p=float(p), r="", s="", method="monte_carlo",
                                 estimate=res.lhs.mean, error=res.lhs.std_error, bound_ref=res.rhs.mean,
                                 ratio=res.lhs.mean / res.rhs.mean, **{"pass": res.passed}))
    v = LemmaVerdict("rosenthal", f"{[d.kind for d in dists]} x k={list(ks)} x p={list(ps)}", tuple(ratios), 1.0,
                     tuple(rows))
    v.notes["results"] = results
    return v


# ---------------------------------------------------------------------------
# criterion stabilization across seeds

DEFAULT_CHECKPOINTS = (250, 500, 1000, 2000)


def log_median(values) -> float:
    """Median of exp(values), returned as a log (even counts: geometric mean of the middle pair)."""
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        return math.nan
    return float(v[n // 2]) if n % 2 else float(0.5 * (v[n // 2 - 1] + v[n // 2]))


@dataclass(frozen=True)
class CriterionDistribution:
    profile: str
    p: float
    seeds: tuple
    checkpoints: tuple
    log_increments: np.ndarray  # (seeds, checkpoints): log(X_p(N) - X_p(N/2))
    log_x: np.ndarray  # (seeds, checkpoints): log X_p(N)
    drivers: tuple  # (n, (n-1)(1-r_n), tail sum after n)

    @property
    def log_median_increment(self) -> np.ndarray:
        return np.array([log_median(col) for col in self.log_increments.T])

    @property
    def log_mean_increment(self) -> np.ndarray:
        k = self.log_increments.shape[0]
        return np.array([logsumexp(col) - math.log(k) for col in self.log_increments.T])

    @property
    def median_strictly_decreasing(self) -> bool:
        m = self.log_median_increment
        return bool(np.all(np.diff(m) < 0))

    @property
    def median_non_decreasing(self) -> bool:
        m = self.log_median_increment
        return bool(np.all(np.diff(m) >= 0))

    def rows(self):
        for i, seed in enumerate(self.seeds):
            for j, N in enumerate(self.checkpoints):
                yield dict(profile=self.profile, p=self.p, seed=seed, N=N,
                           log_x=float(self.log_x[i, j]), log_increment=float(self.log_increments[i, j]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["profile", "p", "seed", "N", "log_x", "log_increment"])
        for row in self.rows():
            w.writerow([row["profile"], repr(row["p"]), row["seed"], row["N"], repr(row["log_x"]),
                        repr(row["log_increment"])])
        w.writerow([])
        w.writerow(["profile", "p", "stat", "N", "log_median_increment", "log_mean_increment"])
        for N, med, mean in zip(self.checkpoints, self.log_median_increment, self.log_mean_increment):
            w.writerow([self.profile, repr(self.p), "summary", N, repr(float(med)), repr(float(mean))])
        w.writerow([])
        w.writerow(["n", "driver", "tail_sum"])
        for n, d, t in self.drivers:
            w.writerow([n, repr(d), repr(t)])
        return buf.getvalue()


def driver_table(profile: RadiusProfile, n_max: int = 30):
    out = []
    for n in range(1, n_max + 1):
        d, t = driver_terms(profile, n)
        out.append((n, float(d), float(t)))
    return tuple(out)


def criterion_distribution(profile: RadiusProfile, ps: Sequence[float], seeds: Sequence[int],
                           checkpoints: Sequence[int] = DEFAULT_CHECKPOINTS, workers: int = 1,
                           driver_n: int = 30):
    """One CriterionDistribution per p; every seed's sample has max(checkpoints) points."""
    checkpoints = tuple(sorted(set(int(c) for c in checkpoints)))
    prof = profile.with_count(checkpoints[-1])
    incs = {p: [] for p in ps}
    xs = {p: [] for p in ps}
    for seed in seeds:
        sample = sample_sequence(prof, seed)
        for p, cp in zip(ps, checkpoint_sums(sample, checkpoints, ps, workers=workers)):
            incs[p].append([cp.log_increment[N] for N in checkpoints])
            xs[p].append([cp.log_x[N] for N in checkpoints])
    drivers = driver_table(prof, min(driver_n, prof.count))
    return [
        CriterionDistribution(prof.spec_string(), float(p), tuple(seeds), checkpoints,
                              np.array(incs[p]), np.array(xs[p]), drivers)
        for p in ps
    ]
