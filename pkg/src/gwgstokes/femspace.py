"""Element configurations, orthonormal polynomial bases and L2 projections.

Every triangle carries one orthonormal basis of degree ``max(k, l, m, n)``
built from centroid-scaled monomials.  Because the monomials are taken in
graded order and orthonormalized by a triangular transform, the first
``dim P_d`` functions span ``P_d`` for every ``d``, so the interior
velocity, weak-gradient, weak-divergence and pressure bases are all
prefixes of the same family.  Edge bases are scaled Legendre polynomials in
the edge parameter.
"""
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .quadrature import MAX_ORDER, edge_rule, triangle_rule


class RegimeError(ValueError):
    """Configuration outside the parameter range where the scheme is well posed."""


def dim_p(degree):
    """Dimension of the scalar polynomial space of total degree ``degree`` in 2-D."""
    return (degree + 1) * (degree + 2) // 2


def mu_default(n, j):
    """Pressure stabilization weight: 0 when ``n <= j``, 1 otherwise."""
    return 0.0 if n <= j else 1.0


@dataclass(frozen=True)
class ElementConfig:
    """Degree tuple ``(k, j, l, m, n)`` and stabilizer parameters.

    ``k`` interior velocity, ``j`` edge velocity, ``l`` weak-gradient
    correction, ``m`` weak divergence, ``n`` pressure.  ``mu`` defaults to
    :func:`mu_default`.
    """

    k: int
    j: int
    l: int
    m: int
    n: int
    gamma: float = 1.0
    beta: float = -1.0
    mu: float = None
    quad_order: int = field(default=None, compare=False)

    def __post_init__(self):
        for name in "kjlmn":
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"degree {name} must be a non-negative integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not (np.isfinite(self.gamma) and np.isfinite(self.beta)):
            raise ValueError("gamma and beta must be finite")
        if self.mu is None:
            object.__setattr__(self, "mu", mu_default(self.n, self.j))
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if self.quad_order is None:
            order = 2 * max(self.k, self.j, self.l, self.m, self.n) + 2
            object.__setattr__(self, "quad_order", order)
        if self.quad_order > MAX_ORDER:
            raise ValueError(f"degrees too high for the available quadrature (order {self.quad_order})")

    @classmethod
    def from_tuple(cls, degrees, **kwargs):
        if isinstance(degrees, str):
            degrees = [int(p) for p in degrees.replace(" ", "").split(",")]
        if len(degrees) != 5:
            raise ValueError("an element is given by five degrees k,j,l,m,n")
        return cls(*degrees, **kwargs)

    @property
    def degrees(self):
        return (self.k, self.j, self.l, self.m, self.n)

    @property
    def s(self):
        return min(self.j, self.l)

    @property
    def error_regime(self):
        """``k-1 <= n <= min(m, k+1)``: the range covered by the error estimates."""
        return self.k - 1 <= self.n <= min(self.m, self.k + 1)

    @property
    def unstabilized_admissible(self):
        """``n <= j``: the pressure stabilizer may be switched off."""
        return self.n <= self.j

    @property
    def element_degree(self):
        return max(self.k, self.l, self.m, self.n)

    def flags(self):
        return {
            "error_regime": self.error_regime,
            "n<=j": self.unstabilized_admissible,
            "mu": self.mu,
        }

    def label(self):
        return "({},{},{},{},{})".format(*self.degrees)


def check_regime(config):
    """Refuse ``mu == 0`` when the pressure degree exceeds the edge degree."""
    if config.mu == 0 and not config.unstabilized_admissible:
        raise RegimeError(
            f"element {config.label()} with mu=0 needs n <= j (here n={config.n}, j={config.j}); "
            "pressure richer than the edge velocity space requires the jump stabilizer (mu > 0)"
        )


def monomial_exponents(degree):
    """Graded exponent pairs ``(a, b)`` for ``x**a * y**b``, total degree <= ``degree``."""
    return [(t - b, b) for t in range(degree + 1) for b in range(t + 1)]


def scaled_monomials(s, degree):
    """Values and gradients of graded monomials at scaled points ``s[..., 2]``.

    Returns ``(vals, grads)`` with shapes ``s.shape[:-1] + (nm,)`` and
    ``s.shape[:-1] + (nm, 2)``; gradients are with respect to ``s``.
    """
    exps = monomial_exponents(degree)
    x, y = s[..., 0], s[..., 1]
    px = [np.ones_like(x)]
    py = [np.ones_like(y)]
    for _ in range(degree):
        px.append(px[-1] * x)
        py.append(py[-1] * y)
    vals = np.stack([px[a] * py[b] for a, b in exps], axis=-1)
    zero = np.zeros_like(x)
    gx = np.stack([a * px[a - 1] * py[b] if a else zero for a, b in exps], axis=-1)
    gy = np.stack([b * px[a] * py[b - 1] if b else zero for a, b in exps], axis=-1)
    return vals, np.stack([gx, gy], axis=-1)


class ElementBasis:
    """Orthonormal bases of ``P_degree(T)`` on every triangle of a mesh.

    ``coeffs[t]`` is lower triangular; row ``i`` holds the monomial
    coefficients of basis function ``i`` on triangle ``t`` in the variables
    ``((x - x_T) / h_T, (y - y_T) / h_T)``.
    """

    def __init__(self, mesh, degree, rule):
        self.degree = degree
        self.dim = dim_p(degree)
        self.centers = np.asarray(mesh.centroids)
        self.scales = np.asarray(mesh.diameters)
        pts, wts = map_triangle_rule(mesh, rule)
        vals, _ = scaled_monomials(self._scale(pts), degree)
        coeffs = np.broadcast_to(np.eye(self.dim), (mesh.n_triangles, self.dim, self.dim)).copy()
        # two passes of Cholesky orthonormalization (Gram-Schmidt with reorthogonalization)
        for _ in range(2):
            b = vals @ np.swapaxes(coeffs, 1, 2)
            gram = np.einsum("tqi,tq,tqj->tij", b, wts, b)
            L = np.linalg.cholesky(gram)
            coeffs = np.linalg.solve(L, coeffs)
        self.coeffs = coeffs
        self.orthonormal = True

    def _scale(self, pts, elements=None):
        c = self.centers if elements is None else self.centers[elements]
        h = self.scales if elements is None else self.scales[elements]
        extra = pts.ndim - 2
        c = c.reshape(c.shape[:1] + (1,) * extra + (2,))
        h = h.reshape(h.shape[:1] + (1,) * (extra + 1))
        return (pts - c) / h

    def evaluate(self, pts, elements=None, degree=None, gradient=False):
        """Basis values at physical points ``pts[t, ..., 2]`` of each element.

        Returns ``(..., nb)`` values and, with ``gradient=True``, also
        ``(..., nb, 2)`` physical gradients.
        """
        nb = self.dim if degree is None else dim_p(degree)
        C = self.coeffs if elements is None else self.coeffs[elements]
        if pts.shape[0] != C.shape[0]:
            raise ValueError(f"points given for {pts.shape[0]} elements, expected {C.shape[0]}")
        C = C[:, :nb, :]
        vals, grads = scaled_monomials(self._scale(pts, elements), self.degree)
        extra = pts.ndim - 2
        Ct = C.reshape(C.shape[:1] + (1,) * extra + C.shape[1:])
        out = np.einsum("...a,...ia->...i", vals, Ct)
        if not gradient:
            return out
        h = self.scales if elements is None else self.scales[elements]
        h = h.reshape(h.shape[:1] + (1,) * (extra + 2))
        g = np.einsum("...ad,...ia->...id", grads, Ct) / h
        return out, g


class EdgeBasis:
    """Orthonormal Legendre basis of ``P_degree(e)`` in the edge parameter ``t``.

    ``t`` runs from ``edges[e, 0]`` (t=0) to ``edges[e, 1]`` (t=1), so both
    owners of an interior edge share one parametrization.
    """

    def __init__(self, mesh, degree):
        self.degree = degree
        self.dim = degree + 1
        self.lengths = np.asarray(mesh.edge_lengths)
        self.orthonormal = True

    def evaluate(self, t, edges=None):
        """Values ``(E, len(t), dim)`` at parameters ``t``."""
        L = self.lengths if edges is None else self.lengths[edges]
        P = legendre.legvander(2.0 * np.asarray(t) - 1.0, self.degree)
        scale = np.sqrt((2 * np.arange(self.dim) + 1)[None, :] / L[:, None])
        return P[None, :, :] * scale[:, None, :]


def map_triangle_rule(mesh, rule):
    """Physical quadrature points ``(T, nq, 2)`` and weights ``(T, nq)``."""
    v = mesh.vertices[mesh.triangles]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
    pts = v[:, None, 0, :] + np.einsum("tij,qj->tqi", J, rule.points)
    wts = rule.weights[None, :] * (2.0 * np.asarray(mesh.areas))[:, None]
    return pts, wts


def map_edge_rule(mesh, rule):
    """Physical quadrature points ``(E, nq, 2)`` and weights ``(E, nq)``."""
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    t = rule.points
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    wts = rule.weights[None, :] * np.asarray(mesh.edge_lengths)[:, None]
    return pts, wts


class Discretization:
    """Bases, quadrature and geometric data of one mesh and element configuration.

    Attributes of note (T triangles, E edges, nq / ne quadrature points):

    ``qpts (T, nq, 2)``, ``qw (T, nq)``
        element quadrature.
    ``epts (E, ne, 2)``, ``ew (E, ne)``
        edge quadrature.
    ``phi (T, nq, nb)``, ``dphi (T, nq, nb, 2)``
        element basis at element points.
    ``phi_edge (T, 3, ne, nb)``
        element basis at the points of each local edge.
    ``chi (E, ne, nj)``
        edge basis at edge points.
    ``normals (T, 3, 2)``
        outward unit normal of each local edge.
    """

    def __init__(self, mesh, config):
        self.mesh = mesh
        self.config = config
        self.tri_rule = triangle_rule(config.quad_order)
        self.edge_rule = edge_rule(config.quad_order)
        self.nk = dim_p(config.k)
        self.nj = config.j + 1
        self.nl = dim_p(config.l)
        self.nm = dim_p(config.m)
        self.nn = dim_p(config.n)

        self.basis = ElementBasis(mesh, config.element_degree, self.tri_rule)
        self.edge_basis = EdgeBasis(mesh, config.j)

        self.qpts, self.qw = map_triangle_rule(mesh, self.tri_rule)
        self.epts, self.ew = map_edge_rule(mesh, self.edge_rule)
        self.phi, self.dphi = self.basis.evaluate(self.qpts, gradient=True)

        te = np.asarray(mesh.tri_edges)
        self.local_epts = self.epts[te]
        self.local_ew = self.ew[te]
        self.phi_edge = self.basis.evaluate(self.local_epts)
        self.chi = self.edge_basis.evaluate(self.edge_rule.points)
        self.normals = np.asarray(mesh.edge_normals)[te] * np.asarray(mesh.tri_normal_signs)[..., None]

    @property
    def n_triangles(self):
        return self.mesh.n_triangles

    def trace_projection(self):
        """Matrices ``(T, 3, nj, nk)`` mapping interior coefficients to ``Q_b`` edge coefficients."""
        chi = self.chi[self.mesh.tri_edges]
        return np.einsum("tenj,ten,tenk->tejk", chi, self.local_ew, self.phi_edge[..., : self.nk])

    def evaluate_field(self, f, pts):
        return _evaluate(f, pts)


def _evaluate(f, pts):
    """Evaluate ``f(x, y)`` at ``pts[..., 2]``; vector and tensor fields put components first.

    Components may be returned as a (nested) tuple mixing arrays and
    constants.
    """
    shape = pts.shape[:-1]
    return _as_field(f(pts[..., 0], pts[..., 1]), shape)


def _as_field(out, shape):
    if isinstance(out, (tuple, list)):
        return np.stack([_as_field(c, shape) for c in out])
    out = np.asarray(out, dtype=float)
    if out.ndim >= len(shape) and out.shape[out.ndim - len(shape):] == shape:
        return out
    return np.broadcast_to(out.reshape(out.shape + (1,) * len(shape)), out.shape + shape).copy()


def project_q0(disc, f, degree=None, elements=None):
    """Elementwise L2 projection of ``f`` onto ``P_degree`` (default ``k``).

    Scalar ``f`` gives ``(T, nb)`` coefficients, a vector field with
    ``c`` components gives ``(T, c, nb)``.
    """
    degree = disc.config.k if degree is None else degree
    if degree > disc.basis.degree:
        raise ValueError(f"degree {degree} exceeds the element basis degree {disc.basis.degree}")
    nb = dim_p(degree)
    sl = slice(None) if elements is None else elements
    pts, w, phi = disc.qpts[sl], disc.qw[sl], disc.phi[sl][..., :nb]
    vals = _evaluate(f, pts)
    # move component axes behind the element axis
    lead = vals.ndim - 2
    vals = np.moveaxis(vals, list(range(lead)), list(range(2, 2 + lead))) if lead else vals
    return np.einsum("tq,tqi,tq...->t...i", w, phi, vals)


def project_qb(disc, f, edges=None):
    """Edgewise L2 projection onto ``P_j``: ``(E, nj)`` or ``(E, c, nj)`` coefficients."""
    sl = slice(None) if edges is None else edges
    pts, w, chi = disc.epts[sl], disc.ew[sl], disc.chi[sl]
    vals = _evaluate(f, pts)
    lead = vals.ndim - 2
    vals = np.moveaxis(vals, list(range(lead)), list(range(2, 2 + lead))) if lead else vals
    return np.einsum("eq,eqa,eq...->e...a", w, chi, vals)


def project_qhp(disc, f):
    """Elementwise L2 projection onto ``P_n``; preserves the integral of ``f``."""
    return project_q0(disc, f, degree=disc.config.n)


def project_qs(disc, G, degree=None, elements=None):
    """Componentwise projection of a tensor field onto ``[P_s]^{2x2}``: ``(T, 2, 2, ns)``."""
    degree = disc.config.s if degree is None else degree
    return project_q0(disc, G, degree=degree, elements=elements)


def evaluate_coefficients(disc, coeffs, pts, elements=None):
    """Evaluate element polynomials with coefficients ``(T, ..., nb)`` at ``pts (T, np, 2)``."""
    nb = coeffs.shape[-1]
    phi = disc.basis.evaluate(pts, elements=elements)[..., :nb]
    return np.einsum("t...i,tqi->t...q", coeffs, phi)


def integrate(disc, f):
    """Integral of ``f`` over the mesh using the element quadrature."""
    vals = _evaluate(f, disc.qpts)
    return np.einsum("...tq,tq->...", vals, disc.qw)
