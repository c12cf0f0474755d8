import numpy as np
import pytest

from gwgstokes.femspace import Discretization, ElementConfig, monomial_exponents
from gwgstokes.mesh import Mesh, uniform_triangulation

ELEMENTS = ["1,0,1,0,0", "2,1,1,0,0", "2,1,1,1,1", "2,1,0,1,1", "2,1,0,2,2"]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_triangles():
    return uniform_triangulation(1)


@pytest.fixture
def skew_triangle():
    return Mesh([[0.1, 0.2], [0.9, 0.35], [0.3, 0.8]], [[0, 1, 2]])


def make_disc(mesh, element, **kw):
    return Discretization(mesh, ElementConfig.from_tuple(element, **kw))


def monomial_correction(disc, v, t=0):
    """Correction ``delta_w`` at quadrature points from a monomial Gram solve on triangle ``t``."""
    lay_nk, nj, l = disc.nk, disc.nj, disc.config.l
    mesh = disc.mesh
    exps = monomial_exponents(l)
    xc = mesh.centroids[t]
    mono = lambda p: np.stack([(p[..., 0] - xc[0]) ** a * (p[..., 1] - xc[1]) ** b for a, b in exps], axis=-1)
    pts, w = disc.qpts[t], disc.qw[t]
    M = np.einsum("qi,q,qj->ij", mono(pts), w, mono(pts))
    v0 = v[: 2 * lay_nk].reshape(2, lay_nk)
    vb = v[2 * lay_nk:].reshape(3, 2, nj)
    rhs = np.zeros((2, 2, len(exps)))
    for e in range(3):
        ep, ew = disc.local_epts[t, e], disc.local_ew[t, e]
        edge = mesh.tri_edges[t, e]
        vb_vals = np.einsum("ca,qa->qc", vb[e], disc.chi[edge])
        v0_vals = np.einsum("ci,qi->qc", v0, disc.basis.evaluate(ep[None], elements=[t])[0][:, :lay_nk])
        # Q_b of the interior trace through the orthonormal edge basis
        proj = np.stack([disc.chi[edge] @ (disc.chi[edge].T @ (ew * v0_vals[:, c])) for c in range(2)], axis=1)
        jump = vb_vals - proj
        rhs += np.einsum("q,qc,qi,d->cdi", ew, jump, mono(ep), disc.normals[t, e])
    coef = np.linalg.solve(M, rhs.reshape(4, -1).T).T.reshape(2, 2, -1)
    return np.einsum("cdi,qi->qcd", coef, mono(pts))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
