"""Command-line entry point: ``levyschauder <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .errors import DivergenceError, LevyError
from .field import GridSpec, load_csv, save_csv
from .harness import EXPERIMENTS, run
from .kernel import builtin_kernel, parse_kernel_name
from .normlab import norm_report
from .operator import apply_quadrature, apply_spectral
from .resolvent import solve_constant, solve_variable
from .symbol import symbol_table


def _kernel(args, dim):
    base, eps = parse_kernel_name(args.kernel)
    return builtin_kernel(base, args.sigma, dim=dim, eps=eps)


def _cmd_verify(args):
    return run(args.config, out_dir=args.out, seed=args.seed, jobs=args.jobs,
               plot_data=args.plot_data, only=args.experiment)


def _cmd_sweep(args):
    return run(args.config, out_dir=args.out, seed=args.seed, jobs=args.jobs,
               plot_data=args.plot_data)


def _cmd_symbol(args):
    grid = GridSpec(args.dim, args.n, args.period)
    t = symbol_table(_kernel(args, args.dim), grid)
    k = grid.wavenumbers().astype(int)
    ks = np.meshgrid(*([k] * grid.dim), indexing="ij")
    names = ["k1", "k2"][: grid.dim]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["re_m", "im_m"])
        for idx in np.ndindex(grid.shape):
            m = t.values[idx]
            w.writerow([int(kk[idx]) for kk in ks] + [f"{m.real:.17g}", f"{m.imag:.17g}"])
    return 0


def _cmd_apply(args):
    u = load_csv(args.inp)
    k = _kernel(args, u.grid.dim)
    spec = quad = None
    if args.route in ("spectral", "both"):
        if k.x_dependent:
            raise LevyError("the spectral route needs an x-independent kernel")
        spec = apply_spectral(symbol_table(k, u.grid), u)
    if args.route in ("quadrature", "both"):
        quad = apply_quadrature(k, u)
    save_csv(spec if spec is not None else quad, args.out)
    if args.route == "both":
        scale = max(spec.sup_norm(), 1e-300)
        print(f"discrepancy {(spec - quad).sup_norm() / scale:.17g}")
    return 0


def _cmd_solve(args):
    f = load_csv(args.inp)
    k = _kernel(args, f.grid.dim)
    trace = None
    code = 0
    if k.x_dependent:
        try:
            u, trace = solve_variable(k, args.lam, f, tol=args.tol, max_iter=args.max_iter)
        except DivergenceError as exc:
            print(f"error: {exc}", file=sys.stderr)
            trace, u, code = exc.trace, None, 1
        if trace is not None and not trace.converged:
            code = 1
    else:
        u = solve_constant(symbol_table(k, f.grid), args.lam, f)
    if u is not None:
        save_csv(u, args.out)
    if args.trace and trace is not None:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "residual", "contraction"])
            ratios = [""] + [f"{c:.17g}" for c in trace.contraction_estimates]
            for i, (r, c) in enumerate(zip(trace.iterates, ratios)):
                w.writerow([i, f"{r:.17g}", c])
    return code


def _cmd_norm(args):
    f = load_csv(args.inp)
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError:
        raise LevyError(f"cannot parse --alphas {args.alphas!r}") from None
    rep = norm_report(f, alphas).to_dict()
    text = json.dumps(rep, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levyschauder",
                                description="Non-local elliptic operators on periodic grids.")
    sub = p.add_subparsers(dest="command", required=True)

    def harness_opts(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help="output directory (default: results)")
        sp.add_argument("--seed", type=int, help="override every config seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--plot-data", action="store_true",
                        help="also write (x, y) columns per experiment")

    v = sub.add_parser("verify", help="run one experiment")
    v.add_argument("experiment", choices=sorted(EXPERIMENTS) + [f"exp_{e}" for e in sorted(EXPERIMENTS)])
    harness_opts(v)
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("sweep", help="run every configured experiment")
    harness_opts(s)
    s.set_defaults(func=_cmd_sweep)

    def kernel_opts(sp):
        sp.add_argument("--kernel", required=True, help="fraclap, aniso2d, nonsym1d, truncated or xdep(eps)")
        sp.add_argument("--sigma", type=float, required=True)

    y = sub.add_parser("symbol", help="tabulate the symbol on a grid")
    kernel_opts(y)
    y.add_argument("--dim", type=int, default=1)
    y.add_argument("--n", type=int, default=256)
    y.add_argument("--period", type=float, default=2 * np.pi)
    y.add_argument("--out", required=True)
    y.set_defaults(func=_cmd_symbol)

    a = sub.add_parser("apply", help="apply the operator to a field")
    kernel_opts(a)
    a.add_argument("--route", choices=["spectral", "quadrature", "both"], default="spectral")
    a.add_argument("--in", dest="inp", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_apply)

    r = sub.add_parser("solve", help="solve (L - lambda) u = f")
    kernel_opts(r)
    r.add_argument("--lambda", dest="lam", type=float, required=True)
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--tol", type=float, default=1e-8)
    r.add_argument("--max-iter", type=int, default=50)
    r.add_argument("--trace", help="CSV of the Picard residual history")
    r.set_defaults(func=_cmd_solve)

    nm = sub.add_parser("norm", help="norm report of a field")
    nm.add_argument("--in", dest="inp", required=True)
    nm.add_argument("--alphas", default="0.3,0.5,0.7,1.0")
    nm.add_argument("--out")
    nm.set_defaults(func=_cmd_norm)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LevyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
