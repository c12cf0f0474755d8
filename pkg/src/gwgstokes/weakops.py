"""Discrete weak gradient and weak divergence as dense per-element matrices.

A local velocity vector holds, in this order, the interior coefficients of
both components (``2 * dim P_k``) followed by the edge coefficients of both
components on local edges 0, 1, 2 (``6 * (j + 1)``).  All operators below
are batched over triangles: arrays carry the triangle index first.
"""
from dataclasses import dataclass

import numpy as np

from .femspace import _evaluate, dim_p, project_q0, project_qb


@dataclass(frozen=True)
class LocalDofLayout:
    nk: int
    nj: int
    nn: int

    @classmethod
    def from_disc(cls, disc):
        return cls(disc.nk, disc.nj, disc.nn)

    @property
    def n_interior(self):
        return 2 * self.nk

    @property
    def n_velocity(self):
        return 2 * self.nk + 6 * self.nj

    def interior(self, comp):
        return slice(comp * self.nk, (comp + 1) * self.nk)

    def edge(self, local_edge, comp):
        start = 2 * self.nk + (2 * local_edge + comp) * self.nj
        return slice(start, start + self.nj)

    def edge_block(self, local_edge):
        start = 2 * self.nk + 2 * local_edge * self.nj
        return slice(start, start + 2 * self.nj)


@dataclass
class LocalOperatorSet:
    """Per-element operator matrices acting on local velocity vectors.

    ``D (T, 2, 2, nl, ndof)``
        coefficients of the correction term in ``[P_l]^{2x2}``.
    ``G (T, 2, 2, ng, ndof)``
        coefficients of the weak gradient in ``[P_g]^{2x2}`` with
        ``g = max(k - 1, l)``.
    ``Dv (T, nm, ndof)``
        coefficients of the weak divergence in ``P_m``.
    ``mismatch (T, 3, 2, nj, ndof)``
        edge coefficients of ``v_b - Q_b v_0`` on each local edge.
    """

    layout: LocalDofLayout
    D: np.ndarray
    G: np.ndarray
    Dv: np.ndarray
    mismatch: np.ndarray

    def gq(self, disc, elements=slice(None)):
        """Weak gradient ``(t, nq, 2, 2, ndof)`` at the element quadrature points."""
        G = self.G[elements]
        return np.einsum("tqi,tcdix->tqcdx", disc.phi[elements][..., : G.shape[3]], G)


def trace_mismatch(disc):
    """Matrices ``(T, 3, 2, nj, ndof)`` giving edge coefficients of ``v_b - Q_b v_0``."""
    lay = LocalDofLayout.from_disc(disc)
    T = disc.n_triangles
    P = disc.trace_projection()
    R = np.zeros((T, 3, 2, lay.nj, lay.n_velocity))
    eye = np.eye(lay.nj)
    for e in range(3):
        for c in range(2):
            R[:, e, c, :, lay.edge(e, c)] = eye
            R[:, e, c, :, lay.interior(c)] = -P[:, e]
    return R


def _solve_mass(disc, rhs, nb):
    """Apply the inverse element mass matrix of the first ``nb`` basis functions.

    ``rhs`` has the basis index in axis ``-2``.  With an orthonormal basis
    the mass matrix is the identity and no solve is needed.
    """
    if disc.basis.orthonormal:
        return rhs
    phi = disc.phi[..., :nb]
    M = np.einsum("tqi,tq,tqj->tij", phi, disc.qw, phi)
    shape = rhs.shape
    flat = rhs.reshape(shape[0], -1, nb, shape[-1])
    out = np.linalg.solve(M[:, None], flat)
    return out.reshape(shape)


def build_delta_w(disc, mismatch=None):
    """Correction matrices ``D (T, 2, 2, nl, ndof)``.

    Row ``(c, d, i)`` is the functional
    ``sum_e <(v_b - Q_b v_0)_c, psi_i n_d>_e`` over the triangle boundary.
    """
    R = trace_mismatch(disc) if mismatch is None else mismatch
    nl = disc.nl
    chi = disc.chi[disc.mesh.tri_edges]                       # (T, 3, ne, nj)
    psi = disc.phi_edge[..., :nl]                             # (T, 3, ne, nl)
    vals = np.einsum("tena,tecax->tencx", chi, R)             # mismatch at edge points
    rhs = np.einsum("ten,teni,ted,tencx->tcdix", disc.local_ew, psi, disc.normals, vals)
    return _solve_mass(disc, rhs, nl)


def gradient_degree(config):
    return max(config.k - 1, config.l, 0)


def build_weak_gradient(disc, D=None):
    """Weak-gradient coefficient matrices ``G (T, 2, 2, ng, ndof)``.

    The classical gradient of ``v_0`` lies in ``[P_{k-1}]^{2x2}`` and the
    correction in ``[P_l]^{2x2}``; both are expressed in the element basis
    of degree ``max(k - 1, l)`` without further projection.
    """
    lay = LocalDofLayout.from_disc(disc)
    D = build_delta_w(disc) if D is None else D
    ng = dim_p(gradient_degree(disc.config))
    T = disc.n_triangles
    psi = disc.phi[..., :ng]
    dphi = disc.dphi[..., : lay.nk, :]
    grad = np.einsum("tq,tqi,tqrd->tdir", disc.qw, psi, dphi)
    grad = _solve_mass(disc, grad, ng)
    G = np.zeros((T, 2, 2, ng, lay.n_velocity))
    for c in range(2):
        G[:, c, :, :, lay.interior(c)] = grad
    G[:, :, :, : disc.nl, :] += D
    return G


def build_weak_divergence(disc):
    """Weak-divergence matrices ``Dv (T, nm, ndof)``.

    ``(div_w v, psi)_T = -(v_0, grad psi)_T + <v_b . n, psi>_{dT}``.
    """
    lay = LocalDofLayout.from_disc(disc)
    nm = disc.nm
    T = disc.n_triangles
    Dv = np.zeros((T, nm, lay.n_velocity))
    dpsi = disc.dphi[..., :nm, :]
    phi = disc.phi[..., : lay.nk]
    vol = -np.einsum("tq,tqic,tqr->tcir", disc.qw, dpsi, phi)
    for c in range(2):
        Dv[:, :, lay.interior(c)] = vol[:, c]
    chi = disc.chi[disc.mesh.tri_edges]
    psi = disc.phi_edge[..., :nm]
    bnd = np.einsum("ten,teni,tec,tena->tecia", disc.local_ew, psi, disc.normals, chi)
    for e in range(3):
        for c in range(2):
            Dv[:, :, lay.edge(e, c)] += bnd[:, e, c]
    return _solve_mass(disc, Dv, nm)


def gradient_at(disc, G, pts):
    """Weak gradient matrices ``(T, np, 2, 2, ndof)`` at points ``pts (T, np, 2)``."""
    psi = disc.basis.evaluate(pts)[..., : G.shape[3]]
    return np.einsum("tqi,tcdix->tqcdx", psi, G)


def build_operators(disc):
    R = trace_mismatch(disc)
    D = build_delta_w(disc, R)
    G = build_weak_gradient(disc, D)
    Dv = build_weak_divergence(disc)
    return LocalOperatorSet(LocalDofLayout.from_disc(disc), D, G, Dv, R)


def interpolate(disc, w):
    """Local vectors ``(T, ndof)`` of ``Q_h w = (Q_0 w, Q_b w)`` for a vector field ``w``."""
    lay = LocalDofLayout.from_disc(disc)
    q0 = project_q0(disc, w)                                   # (T, 2, nk)
    qb = project_qb(disc, w)                                   # (E, 2, nj)
    T = disc.n_triangles
    out = np.zeros((T, lay.n_velocity))
    out[:, : 2 * lay.nk] = q0.reshape(T, -1)
    out[:, 2 * lay.nk:] = qb[disc.mesh.tri_edges].reshape(T, -1)
    return out


def identity_check(disc, ops=None, n_draws=100, rng=None):
    """Residuals of ``(grad_w v, phi) = -(v_0, div phi) + <v_b, phi n>`` per element.

    ``v`` ranges over ``n_draws`` random local vectors and ``phi`` over
    random tensors in ``[P_s]^{2x2}``; returns the largest absolute
    residual of each triangle.
    """
    rng = np.random.default_rng(rng)
    ops = build_operators(disc) if ops is None else ops
    lay = ops.layout
    ns = dim_p(disc.config.s)
    T = disc.n_triangles
    v = rng.standard_normal((n_draws, T, lay.n_velocity))
    coef = rng.standard_normal((n_draws, T, 2, 2, ns))
    gw = np.einsum("tqcdx,rtx->rtqcd", ops.gq(disc), v)
    phi = np.einsum("rtcdi,tqi->rtqcd", coef, disc.phi[..., :ns])
    div_phi = np.einsum("rtcdi,tqid->rtqc", coef, disc.dphi[..., :ns, :])
    v0 = np.einsum("rtcn,tqn->rtqc", v[..., : 2 * lay.nk].reshape(n_draws, T, 2, lay.nk),
                   disc.phi[..., : lay.nk])
    lhs = np.einsum("tq,rtqcd,rtqcd->rt", disc.qw, gw, phi)
    rhs = -np.einsum("tq,rtqc,rtqc->rt", disc.qw, v0, div_phi)
    chi = disc.chi[disc.mesh.tri_edges]                       # (T, 3, ne, nj)
    vb = v[..., 2 * lay.nk:].reshape(n_draws, T, 3, 2, lay.nj)
    vb_pts = np.einsum("tena,rteca->rtenc", chi, vb)
    phi_e = np.einsum("rtcdi,teni->rtencd", coef, disc.phi_edge[..., :ns])
    rhs += np.einsum("ten,rtenc,rtencd,ted->rt", disc.local_ew, vb_pts, phi_e, disc.normals)
    return np.abs(lhs - rhs).max(axis=0)


def commuting_check(disc, w, grad_w, ops=None, n_draws=20, rng=None):
    """Residuals of ``(grad_w Q_h w, phi) = (grad w, phi) + ((I - Q_0) w, div phi)``.

    ``phi`` ranges over ``n_draws`` random tensors in ``[P_s]^{2x2}`` per
    element; returns the largest absolute residual of each triangle.
    """
    rng = np.random.default_rng(rng)
    ops = build_operators(disc) if ops is None else ops
    ns = dim_p(disc.config.s)
    T = disc.n_triangles
    vq = interpolate(disc, w)
    gw = np.einsum("tqcdx,tx->tqcd", ops.gq(disc), vq)
    exact_grad = np.moveaxis(_evaluate(grad_w, disc.qpts), [0, 1], [2, 3])   # (T, nq, 2, 2)
    q0 = project_q0(disc, w)
    w_q = np.moveaxis(_evaluate(w, disc.qpts), 0, -1)
    w0_q = np.einsum("tci,tqi->tqc", q0, disc.phi[..., : disc.nk])
    diff = w_q - w0_q

    coef = rng.standard_normal((n_draws, T, 2, 2, ns))
    phi = np.einsum("rtcdi,tqi->rtqcd", coef, disc.phi[..., :ns])
    div_phi = np.einsum("rtcdi,tqid->rtqc", coef, disc.dphi[..., :ns, :])
    lhs = np.einsum("tq,tqcd,rtqcd->rt", disc.qw, gw, phi)
    rhs = np.einsum("tq,tqcd,rtqcd->rt", disc.qw, exact_grad, phi)
    rhs += np.einsum("tq,tqc,rtqc->rt", disc.qw, diff, div_phi)
    return np.abs(lhs - rhs).max(axis=0)
