"""Command line entry point: ``fieldcouple <subcommand> ...``.

Exit codes: 0 success, 1 usage or validation error, 2 capacity error,
3 file I/O error.  Failures print one ``error[<kind>]: <message>`` line on
stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import bounds, discrepancy, fieldsim, lattice, spectral, transport

EXIT_USAGE, EXIT_CAPACITY, EXIT_IO = 1, 2, 3


class UsageError(Exception):
    def __init__(self, message, usage=""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _read_text(path):
    with open(path) as fh:
        return fh.read()


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment; dashes and underscores are interchangeable."""
    out = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# ---------------------------------------------------------------- subcommands


def cmd_lattice(args):
    shell = lattice.enumerate_shell(args.dim, args.m)
    lines = [f"r={shell.count}\n"]
    if args.list:
        lines.append(_csv_text([f"x{i + 1}" for i in range(args.dim)], shell.points.tolist()))
    _write_text(args.out, "".join(lines))


def cmd_measure(args):
    if args.arithmetic:
        n, m = args.arithmetic
        meas = spectral.arithmetic_measure(lattice.enumerate_shell(n, m))
    else:
        n, cells = args.uniform
        meas = spectral.uniform_sphere_discretization(n, cells)
    _write_text(args.out, meas.to_json() + "\n")


def _load_measure(path):
    return spectral.SpectralMeasure.from_json(_read_text(path))


def cmd_couple(args):
    src, tgt = _load_measure(args.source), _load_measure(args.target)
    if args.method == "exact":
        plan = transport.exact_plan(src, tgt, args.k, limit=args.solver_limit)
    else:
        part = discrepancy.build_partition(src.n, args.r)
        plan = transport.partition_plan(src, tgt, part)
    _write_text(args.out, plan.to_json(args.k) + "\n")


def _load_plan(path):
    return transport.TransportPlan.from_json(_read_text(path)).validate(1e-9)


def cmd_simulate(args):
    plan = _load_plan(args.plan)
    n = plan.source.n
    grid = fieldsim.ball_grid(n, args.radius, args.spacing)
    pairs = fieldsim.plan_pairs(plan)
    alphas = spectral.multi_indices(n, args.k)
    cols = {}
    for alpha in alphas:
        f1, f2 = fieldsim.monte_carlo(pairs, grid.points, args.reps, args.seed, alpha, args.threads)
        cols[alpha] = (f1, f2, f2 - f1)
    header = (["rep"] if args.reps > 1 else []) + [f"x{i + 1}" for i in range(n)] + ["f1", "f2", "F"]
    for alpha in alphas[1:]:
        tag = "d" + "".join(str(a) for a in alpha)
        header += [f"{tag}_f1", f"{tag}_f2", f"{tag}_F"]
    rows = []
    for r in range(args.reps):
        for p, x in enumerate(grid.points):
            row = [r] if args.reps > 1 else []
            row += list(x)
            for alpha in alphas:
                row += [c[r, p] for c in cols[alpha]]
            rows.append(row)
    _write_text(args.out, _csv_text(header, rows))


def cmd_rates(args):
    ms = lattice.representable_sequence(args.dim, args.m_max, exclude_mod4_powers=args.dim == 3)
    ms = [m for m in ms if lattice.shell_count(args.dim, m) >= args.min_count]
    recs = discrepancy.rate_table(args.dim, ms, args.radius, args.k, eps=args.eps, threads=args.threads)
    _write_text(args.out, discrepancy.rates_csv(recs))


def _verify_variance(args, plan):
    n = plan.source.n
    grid = fieldsim.ball_grid(n, args.radius, args.spacing)
    pairs = fieldsim.plan_pairs(plan)
    f1, f2 = fieldsim.monte_carlo(pairs, grid.points, args.reps, args.seed, None, args.threads)
    F = f2 - f1
    emp = np.mean(F * F, axis=0)
    se = np.std(F * F, axis=0, ddof=1) / np.sqrt(args.reps)
    ana = fieldsim.analytic_variance(plan, grid.points, [0] * n)
    z = np.where(se > 0, (emp - ana) / np.where(se > 0, se, 1.0), 0.0)
    header = [f"x{i + 1}" for i in range(n)] + ["analytic_var", "empirical_var", "std_error", "z"]
    rows = [list(x) + [a, e, s, zz] for x, a, e, s, zz in zip(grid.points, ana, emp, se, z)]
    return _csv_text(header, rows)


def _verify_tails(args, plan):
    rows = bounds.empirical_tail(plan, args.radius, args.k, args.a_values, args.reps, args.seed,
                                 c1=args.c1, threads=args.threads)
    return _csv_text(["A", "frequency", "wilson_lo", "wilson_hi", "tail_bound"],
                     [[r.A, r.frequency, r.wilson_lo, r.wilson_hi, r.bound] for r in rows])


def _verify_sandwich(args, plan):
    src, tgt = plan.source, plan.target
    plans = {
        "input": plan,
        "exact": transport.exact_plan(src, tgt, args.k, limit=args.solver_limit),
        "partition": transport.partition_plan(src, tgt, discrepancy.build_partition(src.n, args.r)),
        "independent": transport.product_plan(src, tgt),
    }
    rows = []
    for name, p in plans.items():
        cost = transport.plan_cost(p, args.k)
        sig = bounds.sigma_R(p, args.radius, args.k)
        den = (args.radius ** 2 + 1) * cost.weighted_cost
        rows.append([name, cost.w2_squared, cost.weighted_cost, sig, sig / den if den > 0 else 0.0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["plan", "w2_squared", "weighted_cost", "sigma_r", "ratio"])
    for row in rows:
        w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    return buf.getvalue()


def cmd_verify(args):
    if args.measure is not None:
        if args.what != "tails":
            raise UsageError("--measure is only accepted with --what tails")
        _write_text(args.out, _verify_tails(args, _load_measure(args.measure)))
        return
    if args.plan is None:
        raise UsageError("missing required flag --plan")
    plan = _load_plan(args.plan)
    handler = {"variance": _verify_variance, "tails": _verify_tails, "sandwich": _verify_sandwich}[args.what]
    _write_text(args.out, handler(args, plan))


# ---------------------------------------------------------------- parser


REQUIRED = {
    "lattice": ["dim", "m"],
    "couple": ["source", "target"],
    "simulate": ["plan", "radius"],
    "rates": ["dim", "m_max"],
    "verify": ["what"],
}


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def build_parser():
    p = _Parser(prog="fieldcouple", description="Couplings of stationary Gaussian fields via spectral measures.")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--config", help="key=value file supplying defaults for subcommand flags")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    out_help = "output file ('-' or omitted: stdout)"

    s = sub.add_parser("lattice", help="count (and list) integer points with |x|^2 = m",
                       description="Output: a line r=<count>; with --list, then CSV rows x1,...,xn.")
    s.add_argument("--dim", type=int, help="dimension n >= 2 (required)")
    s.add_argument("--m", type=int, help="squared radius m >= 1 (required)")
    s.add_argument("--list", action="store_true", help="also list the points, lexicographically sorted")
    s.add_argument("--out", default=None, help=out_help)
    s.set_defaults(func=cmd_lattice)

    s = sub.add_parser("measure", help="emit a spectral measure as JSON",
                       description='Output JSON: {"n": int, "atoms": [[[coords...], weight], ...]}.')
    g = s.add_mutually_exclusive_group()
    g.add_argument("--arithmetic", nargs=2, type=int, metavar=("N", "M"),
                   help="uniform measure on the normalized shell |x|^2 = M in Z^N")
    g.add_argument("--uniform", nargs=2, type=int, metavar=("N", "CELLS"),
                   help="equal-area discretization of the sphere in R^N (N = 2, 3; CELLS even)")
    s.add_argument("--out", default=None, help=out_help)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("couple", help="build a symmetric transport plan between two measures",
                       description='Output JSON: {"entries": [[i, j, mass], ...], "w2_squared": x, '
                                   '"weighted_cost": y, "k": k, "source": measure, "target": measure}.')
    s.add_argument("--source", help="source measure JSON (required)")
    s.add_argument("--target", help="target measure JSON (required)")
    s.add_argument("--method", choices=["exact", "partition"], default="exact",
                   help="exact LP optimum or the partition-based plan")
    s.add_argument("--k", type=int, default=0, help="smoothness degree in the weighted cost")
    s.add_argument("--r", type=float, default=0.5, help="partition cell diameter (partition method)")
    s.add_argument("--solver-limit", type=int, default=transport.DEFAULT_SOLVER_LIMIT,
                   help="largest atom count per side accepted by the exact solver")
    s.add_argument("--out", default=None, help=out_help)
    s.set_defaults(func=cmd_couple)

    s = sub.add_parser("simulate", help="sample the coupled fields f1, f2, F on a ball grid",
                       description="Output CSV columns: [rep,]x1..xn,f1,f2,F then "
                                   "d<alpha>_f1,d<alpha>_f2,d<alpha>_F for 1<=|alpha|<=k.")
    s.add_argument("--plan", help="plan JSON from 'couple' (required)")
    s.add_argument("--radius", type=float, help="ball radius R (required)")
    s.add_argument("--k", type=int, default=0, help="highest derivative order")
    s.add_argument("--seed", type=int, default=0, help="RNG seed")
    s.add_argument("--reps", type=int, default=1, help="number of independent draws")
    s.add_argument("--spacing", type=float, default=0.1, help="grid spacing")
    s.add_argument("--out", default=None, help=out_help)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("rates", help="per-m W2 and sigma_R bounds for arithmetic waves",
                       description="Output CSV header: " + ",".join(discrepancy.RATE_HEADER))
    s.add_argument("--dim", type=int, help="dimension n (required)")
    s.add_argument("--m-max", type=int, help="largest m (required)")
    s.add_argument("--radius", type=float, default=2.0, help="ball radius R")
    s.add_argument("--k", type=int, default=0, help="smoothness degree (carried into the records)")
    s.add_argument("--eps", type=float, default=0.0, help="epsilon in the reference rate exponent")
    s.add_argument("--min-count", type=int, default=1, help="keep m with r_n(m) >= this")
    s.add_argument("--out", default=None, help=out_help)
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("verify", help="Monte Carlo and cost checks for a plan",
                       description="Output CSV per mode. variance: x..,analytic_var,empirical_var,std_error,z; "
                                   "tails: A,frequency,wilson_lo,wilson_hi,tail_bound; "
                                   "sandwich: plan,w2_squared,weighted_cost,sigma_r,ratio.")
    s.add_argument("--what", choices=["variance", "tails", "sandwich"], help="check to run (required)")
    s.add_argument("--plan", help="plan JSON (required unless --measure)")
    s.add_argument("--measure", help="spectral measure JSON (tails only; the field itself is tested)")
    s.add_argument("--radius", type=float, default=2.0, help="ball radius R")
    s.add_argument("--k", type=int, default=0, help="smoothness degree")
    s.add_argument("--reps", type=int, default=10000, help="Monte Carlo replicates")
    s.add_argument("--seed", type=int, default=0, help="RNG seed")
    s.add_argument("--spacing", type=float, default=0.5, help="grid spacing for the variance check")
    s.add_argument("--a-values", type=_float_list, default=[2.0, 3.0, 4.0, 5.0],
                   help="comma separated thresholds A (tails)")
    s.add_argument("--c1", type=float, default=1.0, help="constant c1 in the tail bound")
    s.add_argument("--r", type=float, default=0.5, help="partition cell diameter for the sandwich")
    s.add_argument("--solver-limit", type=int, default=transport.DEFAULT_SOLVER_LIMIT,
                   help="largest atom count per side accepted by the exact solver")
    s.add_argument("--out", default=None, help=out_help)
    s.set_defaults(func=cmd_verify)
    return p, sub


def _apply_config(args, subparser, config):
    actions = {a.dest: a for a in subparser._actions}
    for key, text in config.items():
        if key not in actions or getattr(args, key, None) not in (None, actions[key].default):
            continue
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            setattr(args, key, text.lower() in ("1", "true", "yes", "on"))
        elif act.nargs in (2, "+"):
            setattr(args, key, [act.type(v) if act.type else v for v in text.split()])
        else:
            setattr(args, key, act.type(text) if act.type else text)


def _validate(args, usage):
    for name in REQUIRED.get(args.command, []):
        if getattr(args, name, None) is None:
            raise UsageError(f"missing required flag --{name.replace('_', '-')}", usage)
    if args.command == "measure" and not (args.arithmetic or args.uniform):
        raise UsageError("one of --arithmetic N M or --uniform N CELLS is required", usage)
    checks = [
        ("threads", lambda v: v >= 1), ("dim", lambda v: v >= 2), ("m", lambda v: v >= 1),
        ("m_max", lambda v: v >= 1), ("radius", lambda v: v > 0), ("k", lambda v: v >= 0),
        ("reps", lambda v: v >= 1), ("spacing", lambda v: v > 0), ("r", lambda v: v > 0),
        ("c1", lambda v: v > 0), ("solver_limit", lambda v: v >= 1),
    ]
    for name, ok in checks:
        v = getattr(args, name, None)
        if v is not None and not ok(v):
            raise UsageError(f"invalid value for --{name.replace('_', '-')}: {v}", usage)


def main(argv=None) -> int:
    parser, sub = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required", parser.format_usage())
        subparser = sub.choices[args.command]
        if args.config:
            _apply_config(args, subparser, read_config(args.config))
        _validate(args, subparser.format_usage())
        args.func(args)
    except UsageError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        sys.stderr.write(f"error[usage]: {exc}\n")
        return EXIT_USAGE
    except (lattice.CapacityError, transport.SolverCapacityError) as exc:
        sys.stderr.write(f"error[capacity]: {exc}\n")
        return EXIT_CAPACITY
    except OSError as exc:
        sys.stderr.write(f"error[io]: {exc}\n")
        return EXIT_IO
    except (ValueError, NotImplementedError) as exc:
        sys.stderr.write(f"error[usage]: {exc}\n")
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
