"""Global saddle-point system of the weak Galerkin Stokes scheme.

Unknown ordering: interior velocity blocks per triangle, then edge velocity
blocks per edge, then pressure blocks per triangle.  The assembled system
is the symmetric indefinite matrix

    [ A   B^T  0 ]
    [ B   -S   c ]
    [ 0   c^T  0 ]

acting on ``(u, -p, lambda)``, where ``A`` is the stiffness plus velocity
stabilizer, ``B`` the weak-divergence coupling, ``S`` the pressure jump
stabilizer and ``c`` the pressure normalization row.  Dirichlet edge
unknowns are eliminated before the constraint is appended.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .femspace import Discretization, _evaluate, project_qb
from .mesh import UNTAGGED
from .weakops import LocalDofLayout, build_operators

CHUNK = 4096


class ConfigurationError(ValueError):
    pass


@dataclass
class ProblemSpec:
    """Data of ``-div(A grad u) + grad p = f``, ``div u = 0``, ``u = g`` on the boundary.

    ``viscosity`` is ``None`` (identity), a constant 2x2 matrix or a callable
    returning ``((a11, a12), (a21, a22))``.  ``dirichlet`` is a single
    vector field or a dict mapping boundary tags to fields; constants are
    accepted in place of callables.
    """

    force: object = None
    dirichlet: object = None
    viscosity: object = None
    exact_u: object = None
    exact_p: object = None
    exact_grad_u: object = None
    name: str = "custom"

    def viscosity_at(self, pts):
        shape = pts.shape[:-1]
        if self.viscosity is None:
            A = np.broadcast_to(np.eye(2), shape + (2, 2))
        elif callable(self.viscosity):
            A = np.moveaxis(_evaluate(self.viscosity, pts), [0, 1], [-2, -1])
        else:
            A = np.broadcast_to(np.asarray(self.viscosity, dtype=float), shape + (2, 2))
        return A

    def check_viscosity(self, A):
        if not np.all(np.isfinite(A)):
            raise ConfigurationError("viscosity has non-finite values")
        if np.abs(A - np.swapaxes(A, -1, -2)).max() > 1e-12 * max(1.0, np.abs(A).max()):
            raise ConfigurationError("viscosity matrix is not symmetric")
        eig = np.linalg.eigvalsh(A.reshape(-1, 2, 2))
        if eig.min() <= 0:
            raise ConfigurationError(f"viscosity is not positive definite (eigenvalue {eig.min():.3g})")
        return float(eig.min()), float(eig.max())


def as_field(value):
    """Wrap a constant vector as a field callable."""
    if value is None:
        return lambda x, y: (0.0 * x, 0.0 * x)
    if callable(value):
        return value
    c = np.asarray(value, dtype=float)
    return lambda x, y: tuple(ci + 0.0 * x for ci in c)


class DofMap:
    """Global numbering of interior, edge and pressure coefficient blocks."""

    def __init__(self, mesh, layout):
        self.layout = layout
        T, E = mesh.n_triangles, mesh.n_edges
        self.n_interior = T * 2 * layout.nk
        self.n_edge = E * 2 * layout.nj
        self.n_velocity = self.n_interior + self.n_edge
        self.n_pressure = T * layout.nn

        vel = np.empty((T, layout.n_velocity), dtype=np.int64)
        vel[:, : 2 * layout.nk] = np.arange(T)[:, None] * 2 * layout.nk + np.arange(2 * layout.nk)
        edge_base = self.n_interior + np.asarray(mesh.tri_edges) * 2 * layout.nj
        vel[:, 2 * layout.nk:] = (edge_base[:, :, None] + np.arange(2 * layout.nj)).reshape(T, -1)
        self.velocity = vel
        self.pressure = np.arange(T)[:, None] * layout.nn + np.arange(layout.nn)
        self.mesh = mesh

    def edge_dofs(self, edges):
        """Global velocity indices ``(len(edges), 2, nj)`` of the given edges."""
        nj = self.layout.nj
        edges = np.asarray(edges)
        base = self.n_interior + edges * 2 * nj
        return base[:, None, None] + np.arange(2)[None, :, None] * nj + np.arange(nj)

    def boundary_dofs(self):
        return self.edge_dofs(self.mesh.boundary_edges).ravel()

    def split_velocity(self, u):
        """Reshape a global velocity vector into ``(T, 2, nk)`` and ``(E, 2, nj)`` blocks."""
        lay = self.layout
        u0 = u[: self.n_interior].reshape(-1, 2, lay.nk)
        ub = u[self.n_interior: self.n_velocity].reshape(-1, 2, lay.nj)
        return u0, ub

    def local(self, u):
        """Gather local velocity vectors ``(T, ndof)`` from a global vector."""
        return u[self.velocity]


def _scatter(rows, cols, vals, shape):
    r = np.broadcast_to(rows[:, :, None], vals.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], vals.shape).ravel()
    return sp.csr_matrix((vals.ravel(), (r, c)), shape=shape)


def _chunks(T):
    for start in range(0, T, CHUNK):
        yield slice(start, min(start + CHUNK, T))


def local_stiffness(disc, ops, spec=None, check=True):
    """Element matrices ``(T, ndof, ndof)`` of ``(A grad_w u, grad_w v)``."""
    spec = spec or ProblemSpec()
    T = disc.n_triangles
    nd = ops.layout.n_velocity
    out = np.empty((T, nd, nd))
    for sl in _chunks(T):
        Gq = ops.gq(disc, sl)
        if spec.viscosity is None:
            out[sl] = np.einsum("tq,tqcdx,tqcdy->txy", disc.qw[sl], Gq, Gq, optimize=True)
        else:
            A = spec.viscosity_at(disc.qpts[sl])
            if check:
                spec.check_viscosity(A)
            AG = np.einsum("tqde,tqcey->tqcdy", A, Gq)
            out[sl] = np.einsum("tq,tqcdx,tqcdy->txy", disc.qw[sl], Gq, AG, optimize=True)
    return out


def local_s1(disc, ops):
    """Element matrices of ``h_T^-gamma <v_b - Q_b v_0, w_b - Q_b w_0>_{dT}``."""
    R = ops.mismatch
    weight = np.asarray(disc.mesh.diameters) ** (-disc.config.gamma)
    return weight[:, None, None] * np.einsum("tecax,tecay->txy", R, R)


def local_divergence(disc, ops):
    """Element matrices ``(T, nn, ndof)`` of ``(div_w v, q)``."""
    nn, nm = disc.nn, disc.nm
    M = np.einsum("tq,tqr,tqi->tri", disc.qw, disc.phi[..., :nn], disc.phi[..., :nm])
    return np.einsum("tri,tix->trx", M, ops.Dv)


def assemble_stiffness(disc, ops, spec=None, dofmap=None):
    dofmap = dofmap or DofMap(disc.mesh, ops.layout)
    n = dofmap.n_velocity
    return _scatter(dofmap.velocity, dofmap.velocity, local_stiffness(disc, ops, spec), (n, n))


def assemble_s1(disc, ops, dofmap=None):
    dofmap = dofmap or DofMap(disc.mesh, ops.layout)
    n = dofmap.n_velocity
    return _scatter(dofmap.velocity, dofmap.velocity, local_s1(disc, ops), (n, n))


def assemble_divergence(disc, ops, dofmap=None):
    """``B`` with ``B[q, v] = sum_T (div_w v, q)_T``; shape ``(n_pressure, n_velocity)``."""
    dofmap = dofmap or DofMap(disc.mesh, ops.layout)
    shape = (dofmap.n_pressure, dofmap.n_velocity)
    return _scatter(dofmap.pressure, dofmap.velocity, local_divergence(disc, ops), shape)


def jump_matrices(disc):
    """Per interior edge: ``(edges, J)`` with ``J (Ei, ne, 2 nn)`` the jump of each pressure basis.

    The jump is the trace from the lower-id owner minus the trace from the
    higher-id owner.
    """
    mesh = disc.mesh
    inner = mesh.interior_edges
    owners = np.asarray(mesh.edge_owners)[inner]
    nn = disc.nn
    J = []
    for side, sign in ((0, 1.0), (1, -1.0)):
        t = owners[:, side]
        le = np.argmax(np.asarray(mesh.tri_edges)[t] == inner[:, None], axis=1)
        J.append(sign * disc.phi_edge[t, le][..., :nn])
    return inner, owners, np.concatenate(J, axis=-1)


def assemble_s2(disc, dofmap=None):
    """Pressure stabilizer ``mu sum_e h_e^-beta <[p], [q]>_e`` over interior edges."""
    mesh = disc.mesh
    layout = LocalDofLayout.from_disc(disc)
    dofmap = dofmap or DofMap(mesh, layout)
    n = dofmap.n_pressure
    cfg = disc.config
    if cfg.mu == 0 or len(mesh.interior_edges) == 0:
        return sp.csr_matrix((n, n))
    inner, owners, J = jump_matrices(disc)
    w = disc.ew[inner] * (cfg.mu * np.asarray(mesh.edge_lengths)[inner] ** (-cfg.beta))[:, None]
    local = np.einsum("eq,eqx,eqy->exy", w, J, J)
    idx = np.concatenate([dofmap.pressure[owners[:, 0]], dofmap.pressure[owners[:, 1]]], axis=1)
    return _scatter(idx, idx, local, (n, n))


def local_load(disc, spec):
    """Element vectors ``(T, 2, nk)`` of ``(f, v_0)``."""
    f = as_field(spec.force)
    fq = _evaluate(f, disc.qpts)
    return np.einsum("tq,ctq,tqr->tcr", disc.qw, fq, disc.phi[..., : disc.nk])


def assemble_rhs(disc, spec, dofmap=None):
    layout = LocalDofLayout.from_disc(disc)
    dofmap = dofmap or DofMap(disc.mesh, layout)
    F = np.zeros(dofmap.n_velocity)
    F[: dofmap.n_interior] = local_load(disc, spec).ravel()
    return F


def mean_vector(disc):
    """``c_r = integral of pressure basis function r``, one entry per pressure unknown."""
    return np.einsum("tq,tqr->tr", disc.qw, disc.phi[..., : disc.nn]).ravel()


def point_vector(disc, x, y):
    """Values of all pressure basis functions at ``(x, y)`` (nonzero on one triangle)."""
    t = disc.mesh.locate(x, y)
    vals = disc.basis.evaluate(np.array([[[x, y]]]), elements=[t])[0, 0, : disc.nn]
    c = np.zeros(disc.n_triangles * disc.nn)
    c[t * disc.nn: (t + 1) * disc.nn] = vals
    return c


@dataclass
class GlobalSystem:
    """Assembled blocks before boundary conditions and normalization."""

    disc: Discretization
    ops: object
    dofmap: DofMap
    stiffness: sp.csr_matrix
    s1: sp.csr_matrix
    B: sp.csr_matrix
    S: sp.csr_matrix
    F: np.ndarray
    spec: ProblemSpec

    @property
    def A(self):
        return (self.stiffness + self.s1).tocsr()

    def saddle_matrix(self):
        """Full symmetric matrix ``[[A, B^T], [B, -S]]`` without constraints."""
        return sp.bmat([[self.A, self.B.T], [self.B, -self.S]], format="csr")


def assemble_system(mesh, config, spec, disc=None, ops=None):
    disc = disc or Discretization(mesh, config)
    ops = ops or build_operators(disc)
    dofmap = DofMap(mesh, ops.layout)
    return GlobalSystem(
        disc=disc,
        ops=ops,
        dofmap=dofmap,
        stiffness=assemble_stiffness(disc, ops, spec, dofmap),
        s1=assemble_s1(disc, ops, dofmap),
        B=assemble_divergence(disc, ops, dofmap),
        S=assemble_s2(disc, dofmap),
        F=assemble_rhs(disc, spec, dofmap),
        spec=spec,
    )


def dirichlet_values(disc, spec):
    """Edge coefficients ``Q_b g`` on every boundary edge: ``(edges, values (Eb, 2, nj))``."""
    mesh = disc.mesh
    bnd = mesh.boundary_edges
    data = spec.dirichlet
    values = np.zeros((len(bnd), 2, disc.nj))
    if data is None:
        return bnd, values
    if not isinstance(data, dict):
        return bnd, project_qb(disc, as_field(data), edges=bnd)
    tags = np.asarray(mesh.edge_tags)[bnd]
    missing = sorted(set(tags.tolist()) - set(data))
    if missing:
        names = ["untagged" if t == UNTAGGED else str(t) for t in missing]
        raise ConfigurationError(f"no Dirichlet data for boundary tag(s) {', '.join(names)}")
    for tag, g in data.items():
        sel = tags == tag
        if sel.any():
            values[sel] = project_qb(disc, as_field(g), edges=bnd[sel])
    return bnd, values


@dataclass
class LinearSystem:
    """Constrained system ``matrix @ z = rhs`` over free velocity, pressure and multiplier."""

    matrix: sp.csc_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    n_velocity: int
    n_pressure: int
    constraint: np.ndarray = field(repr=False, default=None)
    # leading unknowns forming element-local blocks, eligible for static condensation
    n_interior: int = 0
    block: int = 0

    @property
    def n_free(self):
        return len(self.free)

    def expand(self, z):
        """Full velocity, pressure (sign corrected) and multiplier from a solution vector."""
        u = np.zeros(self.n_velocity)
        u[self.free] = z[: self.n_free]
        u[self.fixed] = self.fixed_values
        p = -z[self.n_free: self.n_free + self.n_pressure]
        lam = z[self.n_free + self.n_pressure:]
        return u, p, lam


def apply_dirichlet(system):
    """Eliminate boundary edge unknowns fixed to ``Q_b g``.

    Returns ``(K, rhs, free, fixed, values)`` where ``K`` is the saddle
    matrix restricted to free velocity and all pressure unknowns.
    """
    disc, dm = system.disc, system.dofmap
    bnd, values = dirichlet_values(disc, system.spec)
    fixed = dm.edge_dofs(bnd).ravel()
    vals = values.ravel()
    mask = np.ones(dm.n_velocity, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)

    A = system.A
    B = system.B
    Aff = A[free][:, free]
    Afb = A[free][:, fixed]
    Bf = B[:, free]
    Bb = B[:, fixed]
    K = sp.bmat([[Aff, Bf.T], [Bf, -system.S]], format="csr")
    rhs = np.concatenate([system.F[free] - Afb @ vals, -(Bb @ vals)])
    return K, rhs, free, fixed, vals


def add_mean_constraint(K, rhs, c, n_free):
    """Append the normalization row/column ``c`` acting on the pressure block."""
    n = K.shape[0]
    col = np.zeros(n)
    col[n_free:] = c
    colm = sp.csr_matrix(col[:, None])
    M = sp.bmat([[K, colm], [colm.T, None]], format="csc")
    return M, np.append(rhs, 0.0)


def build_linear_system(system, constraint="mean"):
    """Boundary conditions plus pressure normalization.

    ``constraint`` is ``"mean"`` (zero mean pressure) or a point
    ``(x, y)`` where the pressure is pinned to zero.
    """
    K, rhs, free, fixed, vals = apply_dirichlet(system)
    if isinstance(constraint, str):
        if constraint != "mean":
            raise ValueError(f"unknown pressure constraint {constraint!r}")
        c = mean_vector(system.disc)
    else:
        c = point_vector(system.disc, *constraint)
    M, b = add_mean_constraint(K, rhs, c, len(free))
    dm = system.dofmap
    return LinearSystem(M, b, free, fixed, vals, dm.n_velocity, dm.n_pressure, constraint=c,
                        n_interior=dm.n_interior, block=2 * dm.layout.nk)


def dump_matrix_market(matrix, path, comment=""):
    scipy.io.mmwrite(path, sp.coo_matrix(matrix), comment=comment, symmetry="general")
