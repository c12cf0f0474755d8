"""Command-line driver: ``gwgstokes convergence | solve | verify``.

``GWG_THREADS`` caps the BLAS thread pools; it is read before numpy is
imported, so it only takes effect when this module is the entry point.
"""
import os

_threads = os.environ.get("GWG_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import logging  # noqa: E402
import math  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

from . import cases  # noqa: E402
from .assembly import ConfigurationError, assemble_system, build_linear_system, dump_matrix_market  # noqa: E402
from .femspace import ElementConfig, RegimeError, check_regime  # noqa: E402
from .mesh import GmshParseError, MeshError, read_gmsh, uniform_triangulation  # noqa: E402
from .postprocess import boundary_deviation, convergence_study, export_vtk  # noqa: E402
from .solver import solve  # noqa: E402

CASE_ALIASES = {
    "1": "case1_uniform", "case1": "case1_uniform", "case1_uniform": "case1_uniform",
    "2": "case2_gmsh", "case2": "case2_gmsh", "case2_gmsh": "case2_gmsh",
    "cavity": "cavity", "cylinder1": "cylinder1", "cylinder3": "cylinder3",
    "cylinder3_channel": "cylinder3_channel", "custom": "custom",
}
DEFAULT_ELEMENT = {"cavity": "2,1,0,1,1", "cylinder1": "2,1,1,1,1", "cylinder3": "2,1,1,1,1",
                   "cylinder3_channel": "2,1,1,1,1"}
CASE1_COARSEST = 16

# (column, low, high) bounds on the final observed orders checked by --check
THRESHOLDS = {
    (1, 0, 1, 0, 0): [(0, 0.85, 1.15), (1, 1.85, 2.15), (2, 0.85, 1.15)],
    (2, 1, 1, 1, 1): [(0, 1.85, 2.15), (1, 2.85, 3.15), (2, 1.85, 2.15)],
    (2, 1, 0, 1, 1): [(0, 0.8, 1.2), (1, 1.8, 2.2), (2, 0.8, 1.2)],
    (2, 1, 0, 2, 2): [(0, 0.85, 1.15), (1, 1.85, 2.15), (2, 1.4, math.inf)],
}
CASE2_THRESHOLDS = {(2, 1, 1, 1, 1): [(0, 1.8, 2.2), (1, 2.8, 3.2), (2, 1.8, 2.2)]}
COLUMNS = ("energy", "l2u", "l2p")

log = logging.getLogger("gwgstokes")


class UsageError(Exception):
    pass


def parse_case(name):
    try:
        return CASE_ALIASES[name]
    except KeyError:
        raise UsageError(f"unknown case {name!r}; choose from {', '.join(sorted(set(CASE_ALIASES.values())))}")


def make_config(args, case):
    element = args.element or DEFAULT_ELEMENT.get(case, "2,1,1,1,1")
    config = ElementConfig.from_tuple(element, gamma=args.gamma, beta=args.beta, mu=args.mu)
    check_regime(config)
    return config


def exact_problem(case):
    return cases.case2() if case == "case2_gmsh" else cases.case1()


def convergence_meshes(args, case):
    if case == "case1_uniform":
        first = args.coarsest or CASE1_COARSEST
        return [uniform_triangulation(first * 2**i) for i in range(args.levels or 4)]
    if case == "case2_gmsh":
        levels = cases.CASE2_LEVELS
        count = args.levels or len(levels)
        if count > len(levels):
            raise UsageError(f"only {len(levels)} case2 fixture levels are shipped")
        return [cases.case2_mesh(level) for level in levels[:count]]
    if case == "custom":
        if not args.mesh:
            raise UsageError("--case custom needs --mesh")
        return [read_gmsh(p) for p in args.mesh]
    raise UsageError(f"case {case} has no exact solution; use 'solve'")


def check_orders(table, config, case):
    bounds = (CASE2_THRESHOLDS if case == "case2_gmsh" else THRESHOLDS).get(config.degrees)
    if bounds is None:
        print(f"no reference orders for element {config.label()}; --check passes trivially")
        return True
    final = table.final_orders()
    ok = True
    for col, lo, hi in bounds:
        value = final[col]
        good = not math.isnan(value) and lo <= value <= hi
        ok &= good
        print(f"{'PASS' if good else 'FAIL'}  {COLUMNS[col]} order {value:.3f} in [{lo}, {hi}]")
    return ok


def cmd_convergence(args):
    case = parse_case(args.case)
    config = make_config(args, case)
    spec = exact_problem(case)
    meshes = convergence_meshes(args, case)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tag = "".join(map(str, config.degrees))

    def report(solution, rep):
        log.info("h=%.5g energy=%.4e l2u=%.4e l2p=%.4e residual=%.1e", rep.h, rep.energy,
                 rep.l2_velocity, rep.l2_pressure, solution.residual)
        if args.dump_matrix:
            dump_matrix_market(solution.linear.matrix, out / f"{case}_{tag}_h{1 / rep.h:.0f}.mtx",
                               comment=f"element {config.label()}")

    table, _ = convergence_study(meshes, config, spec, callback=report)
    path = out / f"convergence_{case}_{tag}.csv"
    table.write_csv(path)
    print(f"element {config.label()} gamma={config.gamma:g} beta={config.beta:g} mu={config.mu:g}")
    print(table.format())
    print(f"wrote {path}")
    if args.check:
        return 0 if check_orders(table, config, case) else 1
    return 0


def solve_mesh(args, case):
    if args.mesh:
        return read_gmsh(args.mesh[0])
    if case == "cavity" or case == "case1_uniform":
        return uniform_triangulation(args.n)
    if case == "case2_gmsh":
        return cases.case2_mesh(cases.CASE2_LEVELS[min(args.levels or 1, len(cases.CASE2_LEVELS)) - 1])
    if case.startswith("cylinder"):
        return cases.obstacle_mesh(3 if case.startswith("cylinder3") else 1)
    raise UsageError("--case custom needs --mesh")


def cmd_solve(args):
    case = parse_case(args.case)
    config = make_config(args, case)
    if case == "cavity":
        spec = cases.cavity(lid=tuple(args.lid))
    elif case.startswith("cylinder"):
        spec = cases.cylinder(channel=case.endswith("channel"))
    else:
        spec = exact_problem(case)
    mesh = solve_mesh(args, case)
    # cavity pressure is pinned at the origin, then shifted to zero mean
    constraint = (0.0, 0.0) if case == "cavity" else "mean"
    system = assemble_system(mesh, config, spec)
    linear = build_linear_system(system, constraint)
    sol = solve(system, constraint, linear=linear)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tag = "".join(map(str, config.degrees))
    path = out / f"{case}_{tag}.vtk"
    export_vtk(sol, path, title=f"{case} element {config.label()}")
    if args.dump_matrix:
        dump_matrix_market(linear.matrix, out / f"{case}_{tag}.mtx", comment=f"element {config.label()}")
    print(f"{case}: element {config.label()}, {mesh.n_triangles} triangles, "
          f"{linear.matrix.shape[0]} unknowns, relative residual {sol.residual:.2e}")
    print(f"max boundary deviation {boundary_deviation(sol):.2e}, pressure integral {sol.pressure_integral():.2e}")
    print(f"wrote {path}")
    return 0


def cmd_verify(args):
    from .verification import run_all

    results = run_all()
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="gwgstokes", description="Generalized weak Galerkin Stokes solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--case", default="1", help="1|case1_uniform, 2|case2_gmsh, cavity, cylinder1, "
                                                   "cylinder3, cylinder3_channel, custom")
        p.add_argument("--element", help="degrees k,j,l,m,n")
        p.add_argument("--gamma", type=float, default=1.0)
        p.add_argument("--beta", type=float, default=-1.0)
        p.add_argument("--mu", type=float, default=None, help="default: 0 when n <= j, else 1")
        p.add_argument("--levels", type=int, default=None)
        p.add_argument("--mesh", nargs="+", help="MSH 2.2 file(s) (custom case or mesh override)")
        p.add_argument("--out", default=".")
        p.add_argument("--dump-matrix", action="store_true", help="write the constrained matrix as Matrix Market")

    p = sub.add_parser("convergence", help="error table over a mesh series")
    common(p)
    p.add_argument("--coarsest", type=int, default=None, help="cells per side of the first case1 mesh")
    p.add_argument("--check", action="store_true", help="exit 1 when orders miss the reference bounds")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("solve", help="single solve with VTK output")
    common(p)
    p.add_argument("--n", type=int, default=16, help="cells per side of the built-in square mesh")
    p.add_argument("--lid", type=float, nargs=2, default=(1.0, 0.0), help="cavity lid velocity")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run the operator and solvability property checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "levels", None) is not None and args.levels < 1:
        parser.error("--levels must be at least 1")
    try:
        return args.func(args)
    except RegimeError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigurationError, MeshError, GmshParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
