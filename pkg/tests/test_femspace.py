import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from conftest import ELEMENTS, make_disc
from gwgstokes.cases import X, Y, case1
from gwgstokes.femspace import (ElementConfig, RegimeError, check_regime, dim_p, evaluate_coefficients, integrate,
                                monomial_exponents, mu_default, project_q0, project_qb, project_qhp, project_qs)
from gwgstokes.mesh import Mesh, uniform_triangulation
from gwgstokes.verification import random_triangles

REFERENCE = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])


def test_dimensions():
    assert [dim_p(d) for d in range(4)] == [1, 3, 6, 10]
    assert monomial_exponents(2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@pytest.mark.parametrize("n, j, mu", [(0, 0, 0.0), (1, 1, 0.0), (0, 1, 0.0), (2, 1, 1.0), (1, 0, 1.0)])
def test_mu_default(n, j, mu):
    assert mu_default(n, j) == mu
    assert ElementConfig(2, j, 1, 2, n).mu == mu


def test_config_parsing():
    c = ElementConfig.from_tuple("2, 1, 0, 1, 1")
    assert c.degrees == (2, 1, 0, 1, 1)
    assert c.s == 0 and c.quad_order == 6 and c.label() == "(2,1,0,1,1)"
    assert c.error_regime and c.unstabilized_admissible
    assert not ElementConfig(3, 1, 1, 0, 0).error_regime


@pytest.mark.parametrize("kwargs", [
    dict(degrees=(1, 0, 1, 0)), dict(degrees=(1, -1, 1, 0, 0)), dict(degrees=(1.5, 0, 1, 0, 0)),
    dict(degrees=(1, 0, 1, 0, 0), gamma=np.inf), dict(degrees=(1, 0, 1, 0, 0), mu=-1.0),
    dict(degrees=(10, 0, 1, 0, 0)),
])
def test_config_rejects(kwargs):
    degrees = kwargs.pop("degrees")
    with pytest.raises(ValueError):
        ElementConfig.from_tuple(degrees, **kwargs)


def test_regime_refusal():
    with pytest.raises(RegimeError, match="n <= j"):
        check_regime(ElementConfig(2, 1, 1, 0, 2, mu=0.0))
    check_regime(ElementConfig(2, 1, 1, 0, 2))
    check_regime(ElementConfig(2, 1, 1, 1, 1, mu=0.0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(ELEMENTS))
def test_bases_orthonormal(seed, element):
    mesh = random_triangles(1, seed)[0]
    disc = make_disc(mesh, element)
    gram = np.einsum("tqi,tq,tqj->tij", disc.phi, disc.qw, disc.phi)
    np.testing.assert_allclose(gram[0], np.eye(disc.basis.dim), atol=1e-10)
    egram = np.einsum("eqa,eq,eqb->eab", disc.chi, disc.ew, disc.chi)
    np.testing.assert_allclose(egram, np.broadcast_to(np.eye(disc.nj), egram.shape), atol=1e-12)


def test_basis_prefix_spans_lower_degree(skew_triangle):
    # the first dim P_1 functions reproduce any linear polynomial exactly
    disc = make_disc(skew_triangle, "2,1,1,1,1")
    f = lambda x, y: 3 * x - 2 * y + 0.5
    c = project_q0(disc, f, degree=1)
    vals = evaluate_coefficients(disc, c, disc.qpts)
    np.testing.assert_allclose(vals, f(disc.qpts[..., 0], disc.qpts[..., 1]), atol=1e-12)


def test_gradients_match_finite_differences(skew_triangle, rng):
    disc = make_disc(skew_triangle, "2,1,1,2,2")
    pts = disc.qpts[:, :3]
    _, g = disc.basis.evaluate(pts, gradient=True)
    eps = 1e-6
    for d in range(2):
        shift = np.zeros(2)
        shift[d] = eps
        fd = (disc.basis.evaluate(pts + shift) - disc.basis.evaluate(pts - shift)) / (2 * eps)
        np.testing.assert_allclose(g[..., d], fd, atol=1e-6)


def test_constant_projection_of_x_squared():
    disc = make_disc(REFERENCE, "0,0,0,0,0")
    c = project_q0(disc, lambda x, y: x**2)
    mean = c[0, 0] * disc.phi[0, 0, 0]
    assert mean == pytest.approx(1 / 6, abs=1e-14)


def test_zero_projects_to_zero():
    disc = make_disc(uniform_triangulation(2), "2,1,1,1,1")
    assert np.all(project_q0(disc, lambda x, y: 0 * x) == 0)
    assert np.all(project_qb(disc, lambda x, y: (0 * x, 0 * y)) == 0)


def test_edge_projection_of_parameter():
    disc = make_disc(REFERENCE, "1,0,1,0,0")
    mesh = REFERENCE
    bottom = [e for e in range(3) if set(mesh.edges[e]) == {0, 1}][0]
    c = project_qb(disc, lambda x, y: x)
    assert c[bottom, 0] * disc.chi[bottom, 0, 0] == pytest.approx(0.5, abs=1e-14)


def test_edge_projection_exact_on_polynomials(rng):
    disc = make_disc(uniform_triangulation(3), "2,2,1,1,1")
    f = lambda x, y: (x * y - 0.3 * y**2, 1 + x)
    cb = project_qb(disc, f)
    vals = np.einsum("eca,eqa->ceq", cb, disc.chi)
    np.testing.assert_allclose(vals, f(disc.epts[..., 0], disc.epts[..., 1]), atol=1e-12)


def test_pressure_projection_case1_oracle():
    mesh = uniform_triangulation(2)
    disc = make_disc(mesh, "2,1,1,1,1")
    spec = case1()
    c = project_qhp(disc, spec.exact_p)
    p = 10 * (2 * X - 1) * (2 * Y - 1)
    for t in range(mesh.n_triangles):
        (x0, y0), (x1, y1), (x2, y2) = mesh.vertices[mesh.triangles[t]]
        # p is bilinear; P1 projection on a triangle from an exact symbolic least-squares fit
        a, b, d = sympy.symbols("a b d")
        s, r = sympy.symbols("s r")
        xs, ys = x0 + s * (x1 - x0) + r * (x2 - x0), y0 + s * (y1 - y0) + r * (y2 - y0)
        q = a + b * X + d * Y
        resid = (p - q).subs({X: xs, Y: ys})
        J = sympy.integrate(sympy.integrate(sympy.expand(resid**2), (r, 0, 1 - s)), (s, 0, 1))
        sol = sympy.solve([sympy.diff(J, v) for v in (a, b, d)], (a, b, d))
        q_exact = sympy.lambdify((X, Y), q.subs(sol))
        pts = disc.qpts[t]
        got = evaluate_coefficients(disc, c[t:t + 1], pts[None], elements=[t])[0]
        np.testing.assert_allclose(got, q_exact(pts[:, 0], pts[:, 1]), atol=1e-11)


def test_pressure_projection_preserves_integral():
    disc = make_disc(uniform_triangulation(3), "2,1,0,1,1")
    f = lambda x, y: np.exp(x**2) * np.sin(y)
    c = project_qhp(disc, f)
    total = np.einsum("ti,tqi,tq->", c, disc.phi[..., :disc.nn], disc.qw)
    assert total == pytest.approx(integrate(disc, f), rel=1e-13)


def test_tensor_projection_degree_zero_is_mean():
    mesh = uniform_triangulation(2)
    disc = make_disc(mesh, "2,1,0,1,1")
    G = case1().exact_grad_u
    c = project_qs(disc, G)
    assert c.shape == (mesh.n_triangles, 2, 2, 1)
    mean = np.einsum("tq,...tq->t...", disc.qw, np.asarray(G(disc.qpts[..., 0], disc.qpts[..., 1]))) \
        / mesh.areas[:, None, None]
    np.testing.assert_allclose(c[..., 0] * disc.phi[:, 0, 0][:, None, None], mean, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_projection_is_best_approximation(seed):
    rng = np.random.default_rng(seed)
    mesh = random_triangles(1, rng)[0]
    disc = make_disc(mesh, "2,1,1,1,1")
    f = lambda x, y: np.sin(4 * x + y) * np.cosh(y)
    c = project_q0(disc, f)
    fv = f(disc.qpts[..., 0], disc.qpts[..., 1])

    def err(coef):
        return np.einsum("tq,tq->", disc.qw, (fv - np.einsum("ti,tqi->tq", coef, disc.phi[..., :disc.nk])) ** 2)

    base = err(c)
    for _ in range(5):
        assert err(c + 1e-3 * rng.standard_normal(c.shape)) > base
    # residual orthogonal to P_k
    r = fv - np.einsum("ti,tqi->tq", c, disc.phi[..., :disc.nk])
    np.testing.assert_allclose(np.einsum("tq,tq,tqi->ti", disc.qw, r, disc.phi[..., :disc.nk]), 0, atol=1e-13)


def test_projection_degree_too_high():
    disc = make_disc(uniform_triangulation(1), "1,0,1,0,0")
    with pytest.raises(ValueError):
        project_q0(disc, lambda x, y: x, degree=3)


def test_outward_normals():
    disc = make_disc(uniform_triangulation(2), "1,0,1,0,0")
    out = disc.local_epts.mean(axis=2) - disc.mesh.centroids[:, None, :]
    assert np.all(np.einsum("ted,ted->te", out, disc.normals) > 0)
