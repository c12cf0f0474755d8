import numpy as np
import pytest

from conftest import ELEMENTS
from gwgstokes.assembly import ProblemSpec, assemble_system, build_linear_system, mean_vector
from gwgstokes.cases import case1, cavity, manufactured, X, Y
from gwgstokes.femspace import ElementConfig, RegimeError
from gwgstokes.mesh import Mesh, uniform_triangulation
from gwgstokes.postprocess import compute_errors
from gwgstokes.solver import (RESIDUAL_TOL, CondensedFactor, SingularSystemError, factorize, solve, solve_linear,
                              solve_stokes)


@pytest.mark.parametrize("element", ELEMENTS)
def test_homogeneous_problem(element):
    sol = solve_stokes(uniform_triangulation(4), ElementConfig.from_tuple(element), ProblemSpec())
    assert np.abs(sol.u).max() < 1e-14
    assert np.abs(sol.p).max() < 1e-14


@pytest.mark.parametrize("element", ["2,1,1,1,1", "2,1,0,1,1", "1,1,0,0,0", "2,2,1,1,1"])
def test_linear_flow_reproduced(element):
    spec = manufactured((Y, X), 0 * X)
    sol = solve_stokes(uniform_triangulation(4), ElementConfig.from_tuple(element), spec)
    report = compute_errors(sol, spec)
    assert report.energy < 1e-11
    assert report.l2_velocity < 1e-12
    assert report.l2_pressure < 1e-11


@pytest.mark.parametrize("element", ELEMENTS)
def test_residual_small(element):
    sol = solve_stokes(uniform_triangulation(8), ElementConfig.from_tuple(element), case1())
    assert sol.residual <= RESIDUAL_TOL
    assert abs(sol.pressure_integral()) < 1e-10


@pytest.mark.parametrize("element", ["2,1,1,1,1", "1,0,1,0,0", "2,1,0,2,2", "2,1,0,1,1"])
def test_mass_balance(element):
    cfg = ElementConfig.from_tuple(element)
    sol = solve_stokes(uniform_triangulation(6), cfg, case1())
    B, S = sol.system.B, sol.system.S
    balance = B @ sol.u + S @ sol.p.ravel()
    assert np.abs(balance).max() < 1e-12
    if cfg.mu == 0:
        # every element conserves mass against all pressure test functions
        assert np.abs(B @ sol.u).max() < 1e-12
    # global flux vanishes
    assert abs(mean_vector(sol.disc) @ (B @ sol.u)) < 1e-12
    assert abs(sol.multiplier) < 1e-10


def test_renumbering_invariance(rng):
    mesh = uniform_triangulation(4)
    perm_t = rng.permutation(mesh.n_triangles)
    perm_v = rng.permutation(mesh.n_vertices)
    inv_v = np.argsort(perm_v)
    shuffled = Mesh(mesh.vertices[perm_v], inv_v[mesh.triangles[perm_t]],
                    boundary_tags={tuple(inv_v[mesh.edges[e]]): mesh.edge_tags[e] for e in mesh.boundary_edges})
    cfg = ElementConfig(2, 1, 0, 2, 2)
    a = compute_errors(solve_stokes(mesh, cfg, case1()))
    b = compute_errors(solve_stokes(shuffled, cfg, case1()))
    np.testing.assert_allclose(a.as_tuple(), b.as_tuple(), rtol=1e-9)


@pytest.mark.parametrize("element", ["1,0,1,0,0", "2,1,0,2,2"])
def test_condensed_factor_matches_lu(element, rng):
    system = assemble_system(uniform_triangulation(5), ElementConfig.from_tuple(element), case1())
    lin = build_linear_system(system)
    b = rng.standard_normal(lin.matrix.shape[0])
    plain = factorize(lin.matrix).solve(b)
    condensed = CondensedFactor(lin.matrix, lin.n_interior, lin.block).solve(b)
    np.testing.assert_allclose(condensed, plain, rtol=1e-8, atol=1e-10 * np.abs(plain).max())


def test_condensed_factor_needs_block_structure():
    system = assemble_system(uniform_triangulation(2), ElementConfig(2, 1, 1, 1, 1), case1())
    lin = build_linear_system(system)
    with pytest.raises(ValueError, match="block diagonal"):
        CondensedFactor(lin.matrix, lin.n_interior, lin.block // 3)


def test_point_constraint_gives_zero_mean():
    system = assemble_system(uniform_triangulation(6), ElementConfig(2, 1, 1, 1, 1), case1())
    pinned = solve(system, (0.0, 0.0))
    meaned = solve(system, "mean")
    assert abs(pinned.pressure_integral()) < 1e-12
    np.testing.assert_allclose(pinned.p, meaned.p, atol=1e-9)
    np.testing.assert_allclose(pinned.u, meaned.u, atol=1e-10)


def test_cavity_driven_by_lid():
    mesh = uniform_triangulation(8)
    cfg = ElementConfig(2, 1, 0, 1, 1)
    still = solve_stokes(mesh, cfg, cavity(lid=(0.0, 0.0)), constraint=(0.0, 0.0))
    assert np.abs(still.u).max() == 0 and np.abs(still.p).max() == 0
    moving = solve_stokes(mesh, cfg, cavity(), constraint=(0.0, 0.0))
    # flow below the lid follows it, the return flow near the bottom opposes it
    t_top, t_bottom = mesh.locate(0.5, 0.95), mesh.locate(0.5, 0.3)
    assert moving.u0[t_top, 0, 0] > 0 > moving.u0[t_bottom, 0, 0]


def test_regime_refused_before_assembly():
    with pytest.raises(RegimeError):
        solve_stokes(uniform_triangulation(2), ElementConfig(2, 1, 1, 0, 2, mu=0.0), case1())


def test_singular_matrix_reported():
    system = assemble_system(uniform_triangulation(2), ElementConfig(1, 0, 1, 0, 0), case1())
    lin = build_linear_system(system)
    lin.matrix = lin.matrix.tolil()
    lin.matrix[:, 0] = 0
    lin.matrix[0, :] = 0
    lin.matrix = lin.matrix.tocsc()
    with pytest.raises(SingularSystemError):
        solve_linear(lin, system.disc.config)
