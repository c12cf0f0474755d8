"""Acceptance criteria, one test each; every test reports a PASS/FAIL line.

The lines are collected and printed again in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from gwgstokes.assembly import assemble_system, build_linear_system
from gwgstokes.cases import X, Y, case1, case2, case2_mesh, cavity, cylinder, manufactured, obstacle_mesh
from gwgstokes.femspace import ElementConfig, project_q0, project_qb
from gwgstokes.mesh import uniform_triangulation
from gwgstokes.postprocess import boundary_deviation, compute_errors, convergence_study, export_vtk, read_vtk
from gwgstokes.solver import solve
from gwgstokes.verification import ELEMENTS, check_identity, check_solvability

RESULTS = []


def report(name, passed, detail, seconds=None):
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    if seconds is not None:
        line += f" [{seconds:.1f} s]"
    RESULTS.append(line)
    print(line)
    return passed


def within(values, targets, tol):
    return all(not math.isnan(v) and abs(v - t) <= tol for v, t in zip(values, targets))


def fmt(orders):
    return "/".join(f"{o:.3f}" for o in orders)


def balance_residual(solution):
    """Largest ``|(div_w u_h, q) + s2(p_h, q)|`` over pressure basis functions, relative to ``||u_h||``."""
    sys_ = solution.system
    r = sys_.B @ solution.u + sys_.S @ solution.p.ravel()
    return float(np.abs(r).max() / max(np.linalg.norm(solution.u), 1e-300))


class Study:
    """Convergence run with timing and the mass-balance residual of every level."""

    def __init__(self, meshes, config, spec):
        self.balance = []
        start = time.perf_counter()
        self.table, self.reports = convergence_study(
            meshes, config, spec, callback=lambda sol, rep: self.balance.append(balance_residual(sol)))
        self.seconds = time.perf_counter() - start
        self.config = config

    @property
    def final(self):
        return self.table.final_orders()


def interpolate_global(system, w):
    disc = system.disc
    return np.concatenate([project_q0(disc, w).ravel(), project_qb(disc, w).ravel()])


def uniform(*levels):
    return [uniform_triangulation(n) for n in levels]


@pytest.fixture(scope="module")
def lowest():
    return Study(uniform(8, 16, 32), ElementConfig(1, 0, 1, 0, 0, gamma=1.0, mu=0.0), case1())


@pytest.fixture(scope="module")
def full_p1():
    return Study(uniform(8, 16, 32), ElementConfig(2, 1, 1, 1, 1), case1())


@pytest.fixture(scope="module")
def l0_p1():
    return Study(uniform(16, 32, 64, 128), ElementConfig(2, 1, 0, 1, 1), case1())


@pytest.fixture(scope="module")
def l0_p2():
    return Study(uniform(8, 16, 32), ElementConfig(2, 1, 0, 2, 2, mu=1.0, beta=-1.0), case1())


def test_criterion_01_identity():
    start = time.perf_counter()
    result = check_identity(ELEMENTS, n_triangles=3, n_draws=100, rng=2024)
    seconds = time.perf_counter() - start
    ok = result.passed and seconds < 5
    assert report("criterion 1 weak gradient identity", ok, result.detail, seconds)


def test_criterion_02_exactness():
    start = time.perf_counter()
    spec = manufactured((Y, X), 0 * X)
    config = ElementConfig(2, 1, 1, 1, 1)
    system = assemble_system(uniform_triangulation(4), config, spec)
    linear = build_linear_system(system)
    sol = solve(system, linear=linear)
    rep = compute_errors(sol, spec)
    # oracle: (Q_h u, 0) with zero multiplier satisfies the assembled equations
    q = np.concatenate([interpolate_global(system, spec.exact_u), np.zeros(system.dofmap.n_pressure + 1)])
    z = np.concatenate([q[: system.dofmap.n_velocity][linear.free], q[system.dofmap.n_velocity:]])
    oracle = float(np.abs(linear.matrix @ z - linear.rhs).max())
    seconds = time.perf_counter() - start
    errors = rep.as_tuple()
    ok = max(errors) <= 1e-9 and oracle <= 1e-9 and seconds < 5
    assert report("criterion 2 discrete exactness", ok,
                  "errors " + "/".join(f"{e:.1e}" for e in errors) + f", oracle residual {oracle:.1e}", seconds)


def test_criterion_03_lowest_order(lowest):
    final = lowest.final
    ok = within(final, (1.0, 2.0, 1.0), 0.15) and lowest.seconds < 60
    assert report("criterion 3 element (1,0,1,0,0)", ok, f"final orders {fmt(final)}, target 1/2/1 +-0.15",
                  lowest.seconds)


def test_canary_lowest_order_energy(lowest):
    energy = lowest.reports[1].energy
    ok = abs(energy - 3.2027e-01) <= 0.1 * 3.2027e-01
    assert report("canary h=1/16 energy error (1,0,1,0,0)", ok, f"{energy:.4e} vs 3.2027e-01 +-10%")


def test_criterion_04_element_21111(full_p1):
    final = full_p1.final
    ok = within(final, (2.0, 3.0, 2.0), 0.15) and full_p1.seconds < 120
    assert report("criterion 4 element (2,1,1,1,1)", ok, f"final orders {fmt(final)}, target 2/3/2 +-0.15",
                  full_p1.seconds)


def test_criterion_05_element_21011(l0_p1):
    final = l0_p1.final
    ok = within(final, (1.0, 2.0, 1.0), 0.2) and l0_p1.seconds < 120
    assert report("criterion 5 element (2,1,0,1,1)", ok, f"final orders {fmt(final)} at h=1/128, target 1/2/1 +-0.2",
                  l0_p1.seconds)


def test_criterion_06_element_21022(l0_p2):
    e, u, p = l0_p2.final
    ok = within((e, u), (1.0, 2.0), 0.15) and p >= 1.4 and l0_p2.seconds < 120
    assert report("criterion 6 element (2,1,0,2,2) mu=1 beta=-1", ok,
                  f"final orders {fmt((e, u, p))}, target 1/2 +-0.15 and pressure >= 1.4", l0_p2.seconds)


def test_criterion_07_case2():
    study = Study([case2_mesh(level) for level in (10, 20, 40)], ElementConfig(2, 1, 1, 1, 1), case2())
    final = study.final
    ok = within(final, (2.0, 3.0, 2.0), 0.2) and study.seconds < 180
    assert report("criterion 7 case 2 fixtures, element (2,1,1,1,1)", ok,
                  f"final orders {fmt(final)}, target 2/3/2 +-0.2", study.seconds)


def test_criterion_08_solvability():
    start = time.perf_counter()
    result = check_solvability(ELEMENTS, n=8)
    seconds = time.perf_counter() - start
    assert report("criterion 8 solvability", result.passed and seconds < 30, result.detail, seconds)


def test_criterion_09_mass_balance(lowest, full_p1, l0_p1, l0_p2):
    worst = {}
    for study in (lowest, full_p1, l0_p1, l0_p2):
        worst[study.config.label()] = max(study.balance)
    ok = max(worst.values()) <= 1e-9
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert report("criterion 9 mass balance (relative to ||u_h||)", ok, detail)


def solve_case(mesh, config, spec, constraint, tmp_path, name):
    system = assemble_system(mesh, config, spec)
    sol = solve(system, constraint)
    path = tmp_path / f"{name}.vtk"
    export_vtk(sol, path)
    data = read_vtk(path)
    T, V = mesh.n_triangles, mesh.n_vertices
    vtk_ok = (data["points"].shape == (V, 3) and data["cells"].shape == (T, 4) and np.all(data["cells"][:, 0] == 3)
              and np.all(data["cell_types"] == 5) and data["point_data"]["velocity"].shape == (V, 3)
              and data["cell_data"]["pressure"].shape == (T,)
              and all(np.all(np.isfinite(a)) for a in (*data["point_data"].values(), *data["cell_data"].values())))
    return vtk_ok, boundary_deviation(sol), abs(sol.pressure_integral())


def test_criterion_10_cavity_and_cylinders(tmp_path):
    start = time.perf_counter()
    runs = [
        ("cavity", uniform_triangulation(16), ElementConfig(2, 1, 0, 1, 1), cavity(), (0.0, 0.0)),
        ("cylinder1", obstacle_mesh(1), ElementConfig(2, 1, 1, 1, 1), cylinder(), "mean"),
        ("cylinder3", obstacle_mesh(3), ElementConfig(2, 1, 1, 1, 1), cylinder(), "mean"),
        ("cylinder3_channel", obstacle_mesh(3), ElementConfig(2, 1, 1, 1, 1), cylinder(channel=True), "mean"),
    ]
    ok = True
    parts = []
    for name, mesh, config, spec, constraint in runs:
        vtk_ok, dev, integral = solve_case(mesh, config, spec, constraint, tmp_path, name)
        ok &= vtk_ok and dev <= 1e-10 and integral <= 1e-9
        parts.append(f"{name} vtk {'ok' if vtk_ok else 'bad'} bc {dev:.1e} mean p {integral:.1e}")
    seconds = time.perf_counter() - start
    ok &= seconds < 300
    assert report("criterion 10 cavity and cylinders", ok, "; ".join(parts), seconds)
