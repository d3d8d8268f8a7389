"""Command-line entry point ``spectral-feast``.

Subcommands
-----------
filter-stats  filter sum and contraction factor of a Butterworth filter
mesh          build, validate and optionally write a mesh
solve         one filtered subspace iteration, CSV output
study         refinement study with observed rates and PASS/FAIL lines
oracle        compare against a dense generalized eigensolver

Exit status is 0 when every run converged and every rate check passed, 1
otherwise, and 2 for usage errors or failures during a run.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path

from . import experiments as ex
from .feast import Status
from .filters import SearchInterval, build_butterworth, check_assumption, filter_stats
from .mesh import DOMAINS, make_mesh, validate_mesh, write_mesh

__all__ = ["build_parser", "main"]


def _interval(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A,B, got {text!r}") from None
    if not a < b:
        raise argparse.ArgumentTypeError(f"interval needs A < B, got {text!r}")
    return a, b


def _k_range(text):
    try:
        a, b = (int(v) for v in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if b <= a:
        raise argparse.ArgumentTypeError(f"k range needs A < B, got {text!r}")
    return tuple(range(a, b + 1))


def _degrees(text):
    try:
        ps = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected degrees like 1 or 1,2,3, got {text!r}") from None
    if not ps or any(p not in (1, 2, 3) for p in ps):
        raise argparse.ArgumentTypeError(f"degrees must be in 1..3, got {text!r}")
    return ps


def _add_run_options(sp, k_range: bool):
    sp.add_argument("--domain", choices=DOMAINS, required=True)
    if k_range:
        sp.add_argument("--p", type=_degrees, required=True,
                        help="degree, or a comma list of degrees run as separate studies")
        sp.add_argument("--k-range", type=_k_range, required=True, metavar="A..B")
    else:
        sp.add_argument("--p", type=int, choices=(1, 2, 3), required=True)
        sp.add_argument("--k", type=int, required=True, help="grid spacing 2^-k")
    sp.add_argument("--interval", type=_interval, required=True, metavar="A,B")
    sp.add_argument("--n-quad", type=int, default=8, metavar="N", help="filter nodes (default 8)")
    sp.add_argument("--m0", type=int, default=6)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--keep-margin", type=float, default=0.1)
    sp.add_argument("--out", type=Path, default=None, help="CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-feast",
                                     description="Filtered subspace iteration for Dirichlet "
                                                 "Laplacian eigenvalue clusters.")
    sub = parser.add_subparsers(dest="command", required=True)

    fs = sub.add_parser("filter-stats", help="Butterworth filter sum and contraction factor")
    fs.add_argument("--center", type=float, required=True)
    fs.add_argument("--radius", type=float, required=True)
    fs.add_argument("--delta", type=float, default=1.0)
    fs.add_argument("--n", type=int, default=8)

    ms = sub.add_parser("mesh", help="build and validate a mesh")
    ms.add_argument("--domain", choices=DOMAINS, required=True)
    ms.add_argument("--n", type=int, default=None, help="cells per unit length")
    ms.add_argument("--k", type=int, default=None, help="use n = 2^k")
    ms.add_argument("--out", type=Path, default=None)

    _add_run_options(sub.add_parser("solve", help="single solve, CSV rows"), k_range=False)
    st = sub.add_parser("study", help="refinement study with rate checks")
    _add_run_options(st, k_range=True)
    st.add_argument("--jobs", type=int, default=1, help="parallel studies over degrees")
    _add_run_options(sub.add_parser("oracle", help="compare with a dense eigensolver"), k_range=False)
    return parser


def _open_out(path):
    if path is None:
        return nullcontext(sys.stdout)
    return open(path, "w", newline="")


def _cmd_filter_stats(args):
    filt = build_butterworth(SearchInterval(args.center, args.radius, args.delta), args.n)
    stats = filter_stats(filt)
    report = check_assumption(filt)
    print("w_sum,kappa_hat,inner_min,outer_sup,kappa_hat_sampled,assumption")
    verdict = "ok" if report.ok else "violated: " + "; ".join(report.failed)
    print(",".join(ex.format_float(v) for v in (stats.w_sum, stats.kappa_hat, stats.inner_min,
                                                stats.outer_sup, stats.sampled_kappa_hat))
          + "," + verdict)
    return 0 if report.ok else 1


def _cmd_mesh(args):
    if (args.n is None) == (args.k is None):
        raise ValueError("give exactly one of --n and --k")
    n = args.n if args.n is not None else 2 ** args.k
    mesh = make_mesh(args.domain, n)
    report = validate_mesh(mesh)
    if args.out is not None:
        write_mesh(mesh, args.out)
    print(f"{args.domain} n={n} vertices={mesh.n_vertices} triangles={mesh.n_triangles} "
          f"edges={mesh.n_edges} h_max={mesh.h_max:.17g} area={mesh.area():.17g}")
    print("valid" if report.ok else "invalid: " + ", ".join(report.failures()))
    return 0 if report.ok else 1


def _run_kwargs(args):
    return dict(n_quad=args.n_quad, m0=args.m0, tol=args.tol, seed=args.seed,
                keep_margin=args.keep_margin)


def _cmd_solve(args):
    out = ex.run_solve(args.domain, args.p, args.k, args.interval, **_run_kwargs(args))
    with _open_out(args.out) as fh:
        ex.write_csv(ex.solve_rows(out), fh)
    print(f"# {out.status} after {out.result.iterations} iterations "
          f"({out.setup_time + out.solve_time:.1f}s)", file=sys.stderr)
    return 0 if out.status is Status.CONVERGED else 1


def _study(config):
    return ex.run_study(config)


def _cmd_study(args):
    configs = [ex.StudyConfig(args.domain, p, args.k_range, args.interval, **_run_kwargs(args))
               for p in args.p]
    if args.jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_study, configs))
    else:
        outcomes = [_study(c) for c in configs]
    rows = [row for o in outcomes for row in o.rows()]
    with _open_out(args.out) as fh:
        ex.write_csv(rows, fh)
    log = sys.stdout if args.out is not None else sys.stderr
    for o in outcomes:
        for line in o.summary_lines():
            print(line, file=log)
    return 0 if all(o.passed for o in outcomes) else 1


def _cmd_oracle(args):
    rep = ex.run_oracle(args.domain, args.p, args.k, args.interval, **_run_kwargs(args))
    lines = [f"status {rep.status} iterations {rep.iterations}",
             "feast " + " ".join(ex.format_float(v) for v in rep.feast_values),
             "dense " + " ".join(ex.format_float(v) for v in rep.dense_values),
             f"max_rel_discrepancy {rep.discrepancy:.3e}"]
    with _open_out(args.out) as fh:
        fh.write("\n".join(lines) + "\n")
    ok = rep.counts_match and rep.discrepancy <= 1e-8
    if rep.status is not Status.CONVERGED and not (rep.status is Status.NO_EIGENVALUES
                                                   and len(rep.dense_values) == 0):
        ok = False
    return 0 if ok else 1


_COMMANDS = {
    "filter-stats": _cmd_filter_stats,
    "mesh": _cmd_mesh,
    "solve": _cmd_solve,
    "study": _cmd_study,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError, MemoryError, OSError) as err:
        print(f"spectral-feast {args.command}: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
