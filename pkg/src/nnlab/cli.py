"""Command-line front end: ``nnlab {estimate,bounds,check,report}``.

Exit codes: 0 success, 2 configuration error, 3 invariant or acceptance violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__, bounds, checks, estimators
from .nngraph import StructuralViolation
from .pointprocess import RNG_FAMILY, Sample

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 2, 3

BOUND_COLUMNS = ["quantity", "d", "argument", "bound", "log_bound", "r_star_or_theta_star",
                 "n_star", "K_d_used"]
REPORT_COLUMNS = ["check", "d", "argument", "estimate", "std_error", "reference", "flagged"]


class ConfigError(ValueError):
    pass


def parse_grid(text: str | None, integer: bool = False) -> list:
    """``start:stop:step`` (endpoints included within half a step), or a comma list."""
    if text is None:
        return []
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise ConfigError(f"bad grid {part!r}; expected start:stop:step")
            a, b, s = (float(x) for x in bits)
            if s <= 0 or b < a:
                raise ConfigError(f"bad grid {part!r}")
            # points past stop by less than half a step are kept (absorbs rounding)
            count = int(math.floor((b - a) / s + 0.5 - 1e-9)) + 1
            out.extend(a + i * s for i in range(count))
        else:
            out.append(float(part))
    if integer:
        if any(abs(x - round(x)) > 1e-9 for x in out):
            raise ConfigError(f"grid {text!r} must hold integers")
        return [int(round(x)) for x in out]
    return [round(x, 12) for x in out]


def parse_dims(text) -> list[int]:
    dims = parse_grid(str(text), integer=True)
    if not dims or any(d < 1 for d in dims):
        raise ConfigError(f"bad --dim {text!r}")
    return dims


def resolve_seed(seed) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get("NNLAB_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"NNLAB_SEED={env!r} is not an integer")
    return 0


def _header(args, command: str, seed: int) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "workers")}
    blob = json.dumps(config, sort_keys=True, default=str)
    return {
        "program": "nnlab", "version": __version__, "command": command, "seed": seed,
        "rng": RNG_FAMILY, "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
    }


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_header(out: Path, header: dict, name: str) -> None:
    (out / f"{name}.header.json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def _formats(args) -> set[str]:
    return {args.format} if args.format else {"csv", "json"}


# ---------------------------------------------------------------- estimate

def cmd_estimate(args) -> int:
    seed = resolve_seed(args.seed)
    dims = parse_dims(args.dim)
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    L_grid = parse_grid(args.L)
    n_grid = parse_grid(args.n, integer=True)
    out = _out_dir(args)
    results = []
    for d in dims:
        cfg = estimators.RunConfig(d=d, n_trials=args.trials, base_seed=seed, side=args.side,
                                   max_redoubles=args.max_redoubles, sampler=args.sampler,
                                   workers=args.workers)
        t0 = time.perf_counter()
        stats = estimators.run_trials(cfg)
        wall = time.perf_counter() - t0
        results += estimators.estimate_g(stats, args.g_kmax, wall)
        full = cfg.resolved_sampler == "torus"
        if L_grid and full:
            results += estimators.estimate_tau(stats, L_grid, wall)
        if n_grid and full:
            results += estimators.estimate_rho(stats, n_grid, wall)
        for n in n_grid:
            for L in L_grid:
                results.append(estimators.estimate_p(stats, n, L, wall))
        if not full and (L_grid or n_grid):
            print(f"d={d}: explore sampler gives chain observables only; TAU/RHO skipped",
                  file=sys.stderr)
    fmts = _formats(args)
    if "csv" in fmts:
        estimators.write_csv(results, out / "estimates.csv")
    if "json" in fmts:
        estimators.write_jsonl(results, out / "estimates.jsonl")
    _write_header(out, _header(args, "estimate", seed), "estimates")
    print(f"wrote {len(results)} estimate rows to {out}")
    return EXIT_OK


# ------------------------------------------------------------------ bounds

def bound_rows(d: int, L_grid, n_grid, k_max: int, kissing: bounds.KissingTable,
               theta_grid=None) -> list[dict]:
    K = kissing[d]
    rows = []
    for L in L_grid:
        if L >= 2:
            env = bounds.tau_lower_envelope(d, L, theta_grid)
            rows.append(dict(quantity="TAU_LOWER", d=d, argument=L, bound=env.value,
                             log_bound=env.log_value, r_star_or_theta_star=env.theta_star,
                             n_star=env.n_star, K_d_used=""))
        if L > 0:
            tb = bounds.compound_tail_bound(d, L, kissing)
            rows.append(dict(quantity="TAU_UPPER", d=d, argument=L, bound=tb.value,
                             log_bound=tb.log_value, r_star_or_theta_star=tb.r_star,
                             n_star="", K_d_used=K))
    for n in n_grid:
        lr = bounds.log_rho_upper(d, n, kissing)
        rows.append(dict(quantity="RHO_UPPER", d=d, argument=n, bound=math.exp(min(0.0, lr)),
                         log_bound=lr, r_star_or_theta_star="", n_star="", K_d_used=K))
    for k in range(1, k_max + 1):
        v = bounds.leading_term(k)
        rows.append(dict(quantity="G_LIMIT", d=d, argument=k, bound=v, log_bound=math.log(v),
                         r_star_or_theta_star="", n_star="", K_d_used=""))
    g1 = bounds.mutual_nn_prob(d)
    rows.append(dict(quantity="G1_ORACLE", d=d, argument=1, bound=g1, log_bound=math.log(g1),
                     r_star_or_theta_star="", n_star="", K_d_used=""))
    return rows


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_bounds_csv(rows, path) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUND_COLUMNS)
    for r in rows:
        w.writerow([_fmt_cell(r[c]) for c in BOUND_COLUMNS])
    Path(path).write_text(buf.getvalue())
    return buf.getvalue()


def cmd_bounds(args) -> int:
    dims = parse_dims(args.dim)
    kissing = bounds.KissingTable.parse(args.kissing)
    for d in dims:
        if d not in kissing:
            raise ConfigError(f"no kissing number for d={d}; pass --kissing {d}=K")
    L_grid = parse_grid(args.L if args.L is not None else "2:20:1")
    n_grid = parse_grid(args.n if args.n is not None else "1:40:1", integer=True)
    if any(L < 0 for L in L_grid) or any(n < 1 for n in n_grid):
        raise ConfigError("L must be >= 0 and n >= 1")
    theta_grid = None
    if args.theta_grid:
        theta_grid = parse_grid(args.theta_grid)
        if any(not 0 < t <= math.pi / 4 + 1e-12 for t in theta_grid):
            raise ConfigError("--theta-grid values must lie in (0, pi/4]")
    rows = []
    for d in dims:
        rows += bound_rows(d, L_grid, n_grid, args.g_kmax, kissing, theta_grid)
    out = _out_dir(args)
    write_bounds_csv(rows, out / "bounds.csv")
    if args.format == "json":
        (out / "bounds.jsonl").write_text(
            "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    _write_header(out, _header(args, "bounds", resolve_seed(args.seed)), "bounds")
    print(f"wrote {len(rows)} bound rows to {out / 'bounds.csv'}")
    return EXIT_OK


# ------------------------------------------------------------------- check

def cmd_check(args) -> int:
    seed = resolve_seed(args.seed)
    out = _out_dir(args)
    if args.replay:
        sample = Sample.load(args.replay)
        problems = checks.check_sample(sample, rule=args.nn_rule)
        if problems:
            print("[FAIL] replayed sample: " + "; ".join(problems))
            return EXIT_VIOLATION
        print("[PASS] replayed sample: no structural violation")
        return EXIT_OK
    dims = parse_dims(args.dim) if args.dim is not None else [1, 2, 3]
    results = checks.run_all(dims, args.trials, seed, args.side, args.nn_rule,
                             args.identity_trials)
    failed = False
    for res in results:
        print(res.line())
        if not res.passed:
            failed = True
            if res.counterexample is not None:
                path = out / "counterexample.json"
                res.counterexample.dump(path)
                print(f"  counterexample written to {path}")
    _write_header(out, _header(args, "check", seed), "check")
    return EXIT_VIOLATION if failed else EXIT_OK


# ------------------------------------------------------------------ report

def _f(x) -> float | None:
    return None if x in ("", None) else float(x)


def build_report(est_rows: list[dict], bound_rows_: list[dict]) -> list[dict]:
    """Join estimates with bound curves and flag 3-sigma inconsistencies.

    TAU rows are checked against TAU_UPPER and TAU_LOWER (the latter only
    where resolvable: below the larger of tau + 3 SE and the Wilson upper
    limit), RHO rows against
    RHO_UPPER, G(1) against G1_ORACLE in every dimension, and G(k) against
    G_LIMIT only for d >= 10 with tolerance max(3 SE, 0.05), since k/(k+1)!
    is a large-dimension limit.
    """
    index = {}
    for b in bound_rows_:
        index[(b["quantity"], int(b["d"]), float(b["argument"]))] = float(b["bound"])
    dims_with_bounds = {int(b["d"]) for b in bound_rows_}
    report = []

    def need(q, d, a):
        key = (q, d, float(a))
        if key not in index:
            raise ConfigError(f"bound file has no {q} row for d={d}, argument={a}")
        return index[key]

    for e in est_rows:
        q, d = e["quantity"], int(e["d"])
        if d not in dims_with_bounds:
            raise ConfigError(f"bound file has no rows for d={d}")
        est, se = float(e["estimate"]), float(e["std_error"])
        if q == "TAU":
            L = float(e["param_L"])
            up = need("TAU_UPPER", d, L) if L > 0 else 1.0
            report.append(dict(check="TAU<=upper", d=d, argument=L, estimate=est, std_error=se,
                               reference=up, flagged=est - 3 * se > up))
            if L >= 2:
                lo = need("TAU_LOWER", d, L)
                # a zero count has SE 0; the Wilson upper limit keeps it from
                # "contradicting" lower bounds far below 1/n_trials
                hi = max(est + 3 * se, float(e["ci_high"]))
                report.append(dict(check="TAU>=lower", d=d, argument=L, estimate=est,
                                   std_error=se, reference=lo, flagged=hi < lo))
        elif q == "RHO":
            n = int(e["param_n"])
            up = need("RHO_UPPER", d, n)
            report.append(dict(check="RHO<=upper", d=d, argument=n, estimate=est, std_error=se,
                               reference=up, flagged=est - 3 * se > up))
        elif q == "G" and not e["param_k"].endswith("+"):
            k = int(e["param_k"])
            if k == 1:
                ref = need("G1_ORACLE", d, 1)
                report.append(dict(check="G1~oracle", d=d, argument=1, estimate=est,
                                   std_error=se, reference=ref,
                                   flagged=abs(est - ref) > 3 * se))
            if d >= 10:
                ref = need("G_LIMIT", d, k)
                report.append(dict(check="G~limit", d=d, argument=k, estimate=est,
                                   std_error=se, reference=ref,
                                   flagged=abs(est - ref) > max(3 * se, 0.05)))
    return report


def cmd_report(args) -> int:
    est_rows = []
    for path in args.estimates:
        est_rows += estimators.read_csv(path)
    b_rows = estimators.read_csv(args.bounds)
    rep = build_report(est_rows, b_rows)
    out = _out_dir(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rep:
        w.writerow([_fmt_cell(r[c]) for c in REPORT_COLUMNS])
    (out / "report.csv").write_text(buf.getvalue())
    flagged = [r for r in rep if r["flagged"]]
    lines = [f"{len(rep)} comparisons, {len(flagged)} flagged"]
    for r in flagged:
        lines.append(f"FLAG {r['check']} d={r['d']} arg={_fmt_cell(r['argument'])}: "
                     f"estimate {r['estimate']:.6g} +- {r['std_error']:.3g} vs "
                     f"{r['reference']:.6g}")
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_VIOLATION if flagged else EXIT_OK


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", default=None, help="dimension(s), e.g. 2 or 1,2,3")
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--seed", type=int, default=None, help="base seed (env NNLAB_SEED)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--side", type=float, default=None, help="torus side override")
    common.add_argument("--g-kmax", type=int, default=5)
    common.add_argument("--L", default=None, help="L grid start:stop:step")
    common.add_argument("--n", default=None, help="n grid start:stop:step")
    common.add_argument("--theta-grid", default=None)
    common.add_argument("--kissing", default=None, help="overrides d=K,d=K")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--out", default=".")

    p = _Parser(prog="nnlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nnlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("estimate", parents=[common], help="Monte Carlo estimates")
    e.add_argument("--sampler", choices=["auto", "torus", "explore"], default="auto")
    e.add_argument("--max-redoubles", type=int, default=2)
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("bounds", parents=[common], help="analytic bound curves")
    b.set_defaults(func=cmd_bounds)

    c = sub.add_parser("check", parents=[common], help="structural and identity checks")
    c.add_argument("--nn-rule", choices=["nearest", "second"], default="nearest",
                   help="'second' deliberately breaks the NN rule (mutation test)")
    c.add_argument("--replay", default=None, help="re-check a dumped counterexample sample")
    c.add_argument("--identity-trials", type=int, default=10_000)
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("report", help="join estimates with bound curves")
    r.add_argument("--estimates", nargs="+", required=True)
    r.add_argument("--bounds", required=True)
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("nnlab: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command in ("estimate", "bounds") and args.dim is None:
        args.dim = "2"
    try:
        return args.func(args)
    except StructuralViolation as exc:
        print(f"nnlab: structural violation: {exc}", file=sys.stderr)
        if exc.sample is not None:
            path = Path(getattr(args, "out", ".")) / "counterexample.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            exc.sample.dump(path)
            print(f"counterexample written to {path}", file=sys.stderr)
        return EXIT_VIOLATION
    except (ConfigError, bounds.KissingUnavailable, ValueError, FileNotFoundError) as exc:
        print(f"nnlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
