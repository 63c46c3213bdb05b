"""Command-line runner: ``steinhaus-lab <subcommand> [options]``.

Every subcommand writes one artifact (CSV or JSON) to stdout, or into
``--out DIR`` together with ``manifest.json`` listing SHA-256 digests of
the artifacts.  Artifacts depend only on the configuration, never on
``--threads`` or wall-clock time.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .blaschke import criterion_sum, phi_lambda
from .criteria import carleson_counterexample, evaluate_criteria, stolz_cover_greedy
from .majorants import (
    CERTIFICATE_TOL,
    alpha_lambda_battery,
    certify_majorant,
    lq_band_product,
    poisson_lq_norm,
)
from .quadrature import DEFAULT_RTOL
from .sequences import ProfileError, parse_profile, sample_sequence
from .stochastic import (
    DEFAULT_CHECKPOINTS,
    DIAGONAL_R_GRID,
    cochran_check,
    cochran_mc_check,
    criterion_distribution,
    diagonal_bound_check,
    offdiagonal_bound_check,
    parse_distribution,
    rosenthal_battery,
    rows_to_csv,
)

LEMMAS = ("cochran", "diagonal", "offdiagonal", "rosenthal", "poisson-norm", "alpha-lambda")
POISSON_BAND = 4.0


# ---------------------------------------------------------------------------
# argument types


def _profile(text: str):
    try:
        return parse_profile(text)
    except (ProfileError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _float_list(text: str):
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from None


def _int_list(text: str):
    try:
        return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: stdout)")
    common.add_argument("--strict", action="store_true", help="exit 1 when any verdict fails")
    common.add_argument("--config", type=Path, default=None, help="flat 'key = value' file; flags override it")
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--seeds", type=_positive_int, default=None, help="use seeds 0..N-1")
    common.add_argument("--rtol", type=float, default=DEFAULT_RTOL, help="quadrature relative tolerance")
    common.add_argument("--cert-tol", type=float, default=CERTIFICATE_TOL)

    prof = argparse.ArgumentParser(add_help=False)
    prof.add_argument("--profile", type=_profile, default=_profile("geometric:q=0.5,N=500"))

    plist = argparse.ArgumentParser(add_help=False)
    plist.add_argument("--p", type=_float_list, default=None, help="comma-separated exponents")

    ap = argparse.ArgumentParser(prog="steinhaus-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("sample", parents=[common, prof], help="draw a sample and tabulate log 1/|B_n(lambda_n)|")
    sub.add_parser("criteria", parents=[common, prof, plist], help="criterion report per seed")
    for name in ("verify-lemma", "verify"):
        v = sub.add_parser(name, parents=[common, plist], help="numerical lemma batteries")
        v.add_argument("lemma_pos", nargs="?", choices=LEMMAS, metavar="LEMMA")
        v.add_argument("--lemma", choices=LEMMAS, default=None)
        v.add_argument("--mc-samples", type=int, default=10**6)
        v.add_argument("--r-grid", type=_float_list, default=None)
        v.add_argument("--k", type=_int_list, default=None, help="Rosenthal: numbers of summands")
        v.add_argument("--dist", action="append", default=None, help="Rosenthal distribution, e.g. exponential:1")
        v.add_argument("--measures", type=_positive_int, default=100, help="alpha-lambda: random measures")
        v.add_argument("--atoms", type=_positive_int, default=5)
    sub.add_parser("majorant", parents=[common, prof, plist], help="build and certify the step majorant")
    cd = sub.add_parser("criterion-dist", parents=[common, prof, plist], help="X_p increments across seeds")
    cd.add_argument("--checkpoints", type=_int_list, default=list(DEFAULT_CHECKPOINTS))
    sc = sub.add_parser("stolz-cover", parents=[common, prof], help="greedy Stolz-angle coverage")
    sc.add_argument("--K", type=int, default=8)
    sc.add_argument("--alpha", type=float, default=10.0)
    sc.add_argument("--M", type=_positive_int, default=720)
    sc.add_argument("--min-uncovered", type=float, default=0.5, help="strict-mode threshold")
    cx = sub.add_parser("carleson-demo", parents=[common], help="radial pairs at prescribed distance")
    cx.add_argument("--n-max", type=int, default=20)
    sub.add_parser("sweep", parents=[common, prof, plist], help="criteria summary over a seed range")
    return ap


def read_config(path: Path) -> dict:
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("_", "-")] = value.strip()
    return out


def _subparser(ap: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in ap._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def parse_config(argv=None) -> argparse.Namespace:
    """Parse flags, folding in ``--config`` values that the flags do not override."""
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = ap.parse_args(argv)
    if args.config is not None:
        sp = _subparser(ap, args.command)
        known = {s[2:] for a in sp._actions for s in a.option_strings if s.startswith("--")}
        try:
            cfg = read_config(args.config)
        except (OSError, ValueError) as exc:
            sp.error(str(exc))
        bad = sorted(set(cfg) - known - {"config"})
        if bad:
            sp.error(f"unknown config keys: {', '.join(bad)}")
        prefix = []
        for key, value in cfg.items():
            action = next(a for a in sp._actions if f"--{key}" in a.option_strings)
            if action.nargs == 0:
                if value.lower() in ("1", "true", "yes", "on"):
                    prefix.append(f"--{key}")
            else:
                prefix += [f"--{key}", value]
        # explicit flags come after the file values, so they win
        args = ap.parse_args([args.command] + prefix + argv[argv.index(args.command) + 1:])
    if getattr(args, "lemma_pos", None) or hasattr(args, "lemma"):
        args.lemma = args.lemma or args.lemma_pos
        if args.lemma is None:
            _subparser(ap, args.command).error("a lemma is required")
    return args


def _seeds(args) -> list:
    return list(range(args.seeds)) if args.seeds else [args.seed]


# ---------------------------------------------------------------------------
# outputs


@dataclass
class RunResult:
    name: str  # artifact stem
    text: str
    passed: bool = True
    errors: dict = field(default_factory=dict)  # achieved error estimates for the manifest


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_default) + "\n"


def _default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args) -> RunResult:
    sample = sample_sequence(args.profile, args.seed)
    table = phi_lambda(sample, workers=args.threads)
    if args.format == "json":
        text = _json({
            "profile": args.profile.spec_string(),
            "seed": args.seed,
            "log_gap": sample.log_gap,
            "theta": sample.theta,
            "log_inv_B": table.value,
        })
    else:
        text = table.to_csv()
    return RunResult("sample", text, table.finite)


def cmd_criteria(args) -> RunResult:
    ps = args.p or [2.0]
    reports = {}
    for seed in _seeds(args):
        rep = evaluate_criteria(sample_sequence(args.profile, seed), ps, workers=args.threads)
        reports[seed] = rep
    ok = all(r.all_positive for r in reports.values())
    if args.format == "json":
        text = _json({str(s): r.to_dict() for s, r in reports.items()})
    else:
        rows = []
        for s, r in reports.items():
            for k, v in r.verdicts.items():
                rows.append([s, "verdict", k, v])
            for p, x in r.x_p.items():
                rows.append([s, "x_p", repr(p), x])
            rows.append([s, "naftalevic_sup", "", r.naftalevic_sup])
            rows.append([s, "weak_separation", "", r.weak_separation])
            rows.append([s, "blaschke_sum", "", r.blaschke_sum])
            for k, v in sorted(r.certificate.items()):
                rows.append([s, "certificate", k, v])
        text = _csv(["seed", "quantity", "key", "value"], rows)
    return RunResult("criteria", text, ok)


def _poisson_rows(qs, rtol):
    rows, ok, errs = [], True, {}
    for q in qs:
        bands = []
        for k in range(1, 5):
            r = 1.0 - 10.0**-k
            res = poisson_lq_norm(r, q, rtol=rtol)
            band = (1.0 - r) ** (q - 1.0) * res.value
            bands.append(band)
            errs[f"poisson q={q} r={r}"] = res.error
            row = dict(lemma="poisson-norm", p=q, r=r, s="", method="quadrature", estimate=res.value,
                       error=res.error, bound_ref="", ratio=band)
            if q == 2.0:
                exact = (1.0 + r * r) / (1.0 - r * r)
                row["bound_ref"] = exact
                row["pass"] = abs(res.value - exact) <= 1e-8 * exact
                ok &= row["pass"]
            rows.append(row)
        spread = max(bands) / min(bands)
        for row in rows[-4:]:
            row["pass"] = bool(row.get("pass", True) and spread <= POISSON_BAND)
        ok &= spread <= POISSON_BAND
    return rows, bool(ok), errs


def _alpha_rows(qs, count, atoms, seed):
    rows, ok = [], True
    for q in qs:
        bat = alpha_lambda_battery(q, count=count, atoms=atoms, seed=seed)
        for i, rep in enumerate(bat.reports):
            passed = rep.within_bound and math.isfinite(rep.s)
            ok &= passed
            rows.append(dict(lemma=f"alpha-lambda:{i}", p=q, r="", s="", method="quadrature", estimate=rep.s,
                             error=rep.quad_error, bound_ref=rep.atom_bound, ratio=rep.s / rep.atom_bound,
                             **{"pass": passed}))
    return rows, bool(ok)


def cmd_verify(args) -> RunResult:
    lemma = args.lemma
    errs = {}
    if lemma == "cochran":
        v = cochran_check()
        rows = list(v.rows)
        ok = v.passed
        if args.mc_samples > 0:
            mc = cochran_mc_check(n=args.mc_samples, seed=args.seed)
            rows += list(mc.rows)
            ok = ok and mc.passed
    elif lemma in ("diagonal", "offdiagonal"):
        rows, ok = [], True
        for p in args.p or ([1.0, 2.0, 3.0] if lemma == "diagonal" else [1.0, 2.0]):
            if lemma == "diagonal":
                v = diagonal_bound_check(p, r_grid=args.r_grid or DIAGONAL_R_GRID, tol=args.rtol)
            else:
                v = offdiagonal_bound_check(p, tol=args.rtol)
            rows += list(v.rows)
            ok = ok and v.passed
    elif lemma == "rosenthal":
        dists = [parse_distribution(d) for d in args.dist] if args.dist else None
        kw = {"dists": dists} if dists else {}
        v = rosenthal_battery(ks=args.k or (2, 16, 64), ps=args.p or (1.5, 2.0, 3.0), seed=args.seed, **kw)
        rows, ok = list(v.rows), v.passed
    elif lemma == "poisson-norm":
        rows, ok, errs = _poisson_rows(args.p or [1.5, 2.0, 3.0], args.rtol)
    else:
        rows, ok = _alpha_rows(args.p or [1.5, 2.0], args.measures, args.atoms, args.seed)
    for row in rows:
        if row.get("method") == "quadrature" and isinstance(row.get("error"), float):
            errs.setdefault(f"{row['lemma']} p={row['p']} r={row['r']} s={row['s']}", row["error"])
    if args.format == "json":
        text = _json({"lemma": lemma, "pass": ok, "rows": rows})
    else:
        text = rows_to_csv(rows)
    return RunResult(f"verify-{lemma}", text, ok, errs)


def cmd_majorant(args) -> RunResult:
    p = (args.p or [2.0])[0]
    certs = {}
    for seed in _seeds(args):
        table = phi_lambda(sample_sequence(args.profile, seed), workers=args.threads)
        certs[seed] = certify_majorant(table, p=p, tol=args.cert_tol)
    ok = all(c.valid and c.l1_bound_holds for c in certs.values())
    if args.format == "json":
        body = {str(s): {**c.to_dict(), "x1": c.x1, "l1_bound_holds": c.l1_bound_holds} for s, c in certs.items()}
        text = _json(body)
    else:
        rows = [[s, i, m] for s, c in certs.items() for i, m in enumerate(c.margins)]
        text = _csv(["seed", "n", "margin"], rows)
        text += "\n" + _csv(
            ["seed", "psi_l1", "psi_lp", "p", "sup_K", "x1", "valid", "l1_bound_holds"],
            [[s, c.psi_l1, c.psi_lp, c.p, c.sup_K, c.x1, c.valid, c.l1_bound_holds] for s, c in certs.items()],
        )
    return RunResult("majorant", text, ok)


def cmd_criterion_dist(args) -> RunResult:
    ps = args.p or [1.0, 2.0]
    dists = criterion_distribution(args.profile, ps, _seeds(args), args.checkpoints, workers=args.threads)
    if args.profile.tail_convergent:
        ok = all(d.median_strictly_decreasing for d in dists)
    else:
        ok = all(d.median_non_decreasing for d in dists)
    if args.format == "json":
        text = _json([{
            "profile": d.profile, "p": d.p, "seeds": list(d.seeds), "checkpoints": list(d.checkpoints),
            "log_increments": d.log_increments, "log_x": d.log_x,
            "log_median_increment": d.log_median_increment, "log_mean_increment": d.log_mean_increment,
            "drivers": [list(x) for x in d.drivers],
        } for d in dists])
    else:
        text = "\n".join(d.to_csv() for d in dists)
    return RunResult("criterion-dist", text, ok)


def cmd_stolz(args) -> RunResult:
    reports = {s: stolz_cover_greedy(sample_sequence(args.profile, s), args.K, args.alpha, args.M) for s in _seeds(args)}
    ok = all(r.uncovered_fraction >= args.min_uncovered for r in reports.values())
    if args.format == "json":
        text = _json({str(s): r.to_dict() for s, r in reports.items()})
    else:
        text = _csv(["seed", "K", "alpha", "M", "covered_fraction", "vertices"],
                    [[s, r.K, r.alpha, args.M, r.covered_fraction, ";".join(repr(v) for v in r.vertices)]
                     for s, r in reports.items()])
    return RunResult("stolz-cover", text, ok)


def cmd_carleson(args) -> RunResult:
    table = carleson_counterexample(args.n_max)
    err = table.max_log_rho_relative_error()
    ok = err <= 1e-10 and all(row.naftalevic_product == row.n for row in table.rows)
    text = _json(json.loads(table.to_json())) if args.format == "json" else table.to_csv()
    return RunResult("carleson", text, ok, {"log_rho_relative_error": err})


def cmd_sweep(args) -> RunResult:
    ps = args.p or [1.0, 2.0]
    rows, ok = [], True
    for seed in _seeds(args):
        rep = evaluate_criteria(sample_sequence(args.profile, seed), ps, workers=args.threads)
        ok &= rep.all_positive
        rows.append([seed, rep.n_points, rep.blaschke_sum, *[rep.x_p[float(p)] for p in ps], rep.naftalevic_sup,
                     rep.weak_separation, bool(rep.certificate.get("valid", False)), rep.all_positive])
    header = ["seed", "n_points", "blaschke_sum", *[f"x_p={p}" for p in ps], "naftalevic_sup", "weak_separation",
              "certificate_valid", "all_verdicts"]
    if args.format == "json":
        text = _json([dict(zip(header, r)) for r in rows])
    else:
        text = _csv(header, rows)
    return RunResult("sweep", text, bool(ok))


COMMANDS = {
    "sample": cmd_sample,
    "criteria": cmd_criteria,
    "verify-lemma": cmd_verify,
    "verify": cmd_verify,
    "majorant": cmd_majorant,
    "criterion-dist": cmd_criterion_dist,
    "stolz-cover": cmd_stolz,
    "carleson-demo": cmd_carleson,
    "sweep": cmd_sweep,
}


def _config_echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("out", "config", "threads"):
            continue
        if hasattr(v, "spec_string"):
            v = v.spec_string()
        elif isinstance(v, Path):
            v = str(v)
        out[k] = v
    return out


def run(args) -> tuple:
    """Execute a parsed config; returns (RunResult, manifest dict or None)."""
    start = time.perf_counter()
    result = COMMANDS[args.command](args)
    manifest = None
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        name = f"{result.name}.{args.format}"
        data = result.text.encode()
        (args.out / name).write_bytes(data)
        manifest = {
            "version": __version__,
            "config": _config_echo(args),
            "wall_clock_seconds": time.perf_counter() - start,
            "achieved_errors": result.errors,
            "pass": result.passed,
            "files": {name: hashlib.sha256(data).hexdigest()},
        }
        (args.out / "manifest.json").write_text(_json(manifest))
    else:
        sys.stdout.write(result.text)
    return result, manifest


def main(argv=None) -> int:
    args = parse_config(argv)
    try:
        result, _ = run(args)
    except (ValueError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.strict and not result.passed:
        print(f"{args.command}: verdict failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
