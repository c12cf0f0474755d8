import numpy as np
import pytest

from gwgstokes.assembly import as_field
from gwgstokes.cases import (ALPHA, INFLOW, OBSTACLE, OUTFLOW, WALL, X, Y, case1, case2, cavity, cylinder,
                             manufactured, obstacle_mesh)
from gwgstokes.mesh import uniform_triangulation

PTS = np.array([[0.5, 0.5], [0.1, 0.7], [0.9, 0.2], [0.33, 0.0]])


def test_case1_force_by_hand():
    x, y = PTS.T
    f = np.array(case1().force(x, y))
    expected = np.array([-2 * y + 20 * (2 * y - 1), 2 * x + 20 * (2 * x - 1)])
    np.testing.assert_allclose(f, expected, atol=1e-12)


def test_case2_force_by_hand():
    x, y = PTS.T
    f = np.array(case2().force(x, y))
    # -laplace u equals 2u for this velocity
    u = np.array([-np.cos(x) * np.sin(y), np.sin(x) * np.cos(y)])
    grad_p = np.array([2 * x * np.exp(x**2) * np.sin(y), np.exp(x**2) * np.cos(y)])
    np.testing.assert_allclose(f, 2 * u + grad_p, atol=1e-12)


@pytest.mark.parametrize("make", [case1, case2])
def test_velocity_divergence_free(make):
    spec = make()
    x, y = PTS.T
    G = np.array(spec.exact_grad_u(x, y))
    np.testing.assert_allclose(G[0, 0] + G[1, 1], 0.0, atol=1e-13)


def test_anisotropic_viscosity():
    spec = manufactured((Y**2, X**2), X + Y, viscosity=((2, 1), (1, 3)))
    f = np.array(spec.force(np.array([0.2]), np.array([0.4])))
    # -div(A grad u_c): A : hessian(u_c), plus grad p
    np.testing.assert_allclose(f.ravel(), [-3 * 2 + 1, -2 * 2 + 1])
    A = spec.viscosity_at(np.zeros((3, 2)))
    np.testing.assert_allclose(A[0], [[2, 1], [1, 3]])


def boundary_flux(mesh, spec):
    total = 0.0
    data = spec.dirichlet
    for e in mesh.boundary_edges:
        t = mesh.edge_owners[e, 0]
        le = list(mesh.tri_edges[t]).index(e)
        n = mesh.edge_normals[e] * mesh.tri_normal_signs[t, le]
        a, b = mesh.vertices[mesh.edges[e]]
        g = as_field(data[mesh.edge_tags[e]] if isinstance(data, dict) else data)
        mid = (a + b) / 2
        total += mesh.edge_lengths[e] * np.dot(np.ravel(g(np.array([mid[0]]), np.array([mid[1]]))), n)
    return total


@pytest.mark.parametrize("channel", [False, True])
@pytest.mark.parametrize("count", [1, 3])
def test_obstacle_data_compatible(channel, count):
    mesh = obstacle_mesh(count)
    spec = cylinder(channel)
    assert set(spec.dirichlet) == {INFLOW, OUTFLOW, WALL, OBSTACLE}
    assert boundary_flux(mesh, spec) == pytest.approx(0.0, abs=1e-9 * ALPHA)


def test_cavity_data_compatible():
    assert boundary_flux(uniform_triangulation(4), cavity()) == pytest.approx(0.0, abs=1e-14)
