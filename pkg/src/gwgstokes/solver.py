"""Direct solution of the constrained saddle-point system."""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_system, build_linear_system, mean_vector
from .femspace import RegimeError, check_regime

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SingularSystemError(RegimeError):
    """The factorization hit a zero pivot."""


@dataclass
class Solution:
    """Discrete velocity ``(u_0, u_b)``, pressure and solver statistics.

    ``u`` is the global velocity vector; ``u0 (T, 2, nk)`` and
    ``ub (E, 2, nj)`` are views of it.  ``p (T, nn)`` holds pressure
    coefficients with the sign of the original scheme.
    """

    u: np.ndarray
    p: np.ndarray
    multiplier: float
    residual: float
    refined: bool
    system: object = field(repr=False, default=None)
    linear: object = field(repr=False, default=None)

    @property
    def disc(self):
        return self.system.disc

    @property
    def mesh(self):
        return self.system.disc.mesh

    @property
    def config(self):
        return self.system.disc.config

    @property
    def u0(self):
        return self.system.dofmap.split_velocity(self.u)[0]

    @property
    def ub(self):
        return self.system.dofmap.split_velocity(self.u)[1]

    def pressure_integral(self):
        return float(mean_vector(self.disc) @ self.p.ravel())


def _singular(config, detail):
    flags = "" if config is None else f" for element {config.label()} with flags {config.flags()}"
    return SingularSystemError(f"singular saddle-point system{flags}: {detail}")


def factorize(matrix, config=None):
    """Sparse LU of ``matrix`` with a column ordering from COLAMD."""
    try:
        return spla.splu(matrix.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise _singular(config, exc) from exc


class CondensedFactor:
    """Factorization after eliminating element-interior unknowns.

    The leading ``n_interior`` unknowns couple only within blocks of size
    ``block`` (one block per element), so they are removed by dense local
    inverses and only the Schur complement on edge, pressure and multiplier
    unknowns goes to the sparse LU.
    """

    def __init__(self, matrix, n_interior, block, config=None):
        M = sp.csr_matrix(matrix)
        nI = n_interior
        nb = nI // block
        AII = M[:nI, :nI].tocoo()
        blocks = np.zeros((nb, block, block))
        np.add.at(blocks, (AII.row // block, AII.row % block, AII.col % block), AII.data)
        off = AII.row // block != AII.col // block
        if np.any(AII.data[off] != 0):
            raise ValueError("interior unknowns are not block diagonal")
        try:
            inv = np.linalg.inv(blocks)
        except np.linalg.LinAlgError as exc:
            raise _singular(config, "singular element interior block") from exc
        self.inv = sp.bsr_matrix((inv, np.arange(nb), np.arange(nb + 1)), shape=(nI, nI)).tocsr()
        self.MIR = M[:nI, nI:].tocsc()
        self.MRI = M[nI:, :nI].tocsr()
        schur = M[nI:, nI:] - self.MRI @ (self.inv @ self.MIR)
        self.n_interior = nI
        self.lu = factorize(schur, config)

    def solve(self, b):
        nI = self.n_interior
        bI, bR = b[:nI], b[nI:]
        zR = self.lu.solve(bR - self.MRI @ (self.inv @ bI))
        zI = self.inv @ (bI - self.MIR @ zR)
        return np.concatenate([zI, zR])


def solve_linear(linear, config=None):
    """Factorize, solve, and apply one refinement step when the residual is too large.

    Returns ``(z, relative_residual, refined)``.
    """
    if linear.n_interior and linear.block:
        lu = CondensedFactor(linear.matrix, linear.n_interior, linear.block, config)
    else:
        lu = factorize(linear.matrix, config)
    b = linear.rhs
    z = lu.solve(b)
    bnorm = np.linalg.norm(b)
    r = b - linear.matrix @ z
    rel = np.linalg.norm(r) / bnorm if bnorm > 0 else np.linalg.norm(r)
    refined = False
    if rel > RESIDUAL_TOL:
        z = z + lu.solve(r)
        r = b - linear.matrix @ z
        rel = np.linalg.norm(r) / bnorm if bnorm > 0 else np.linalg.norm(r)
        refined = True
    if not np.all(np.isfinite(z)) or rel > 1e-6:
        flags = "" if config is None else f" (element {config.label()}, flags {config.flags()})"
        raise SingularSystemError(f"solve failed with relative residual {rel:.3e}{flags}")
    if rel > RESIDUAL_TOL:
        log.warning("relative residual %.3e above %.0e after refinement", rel, RESIDUAL_TOL)
    return z, float(rel), refined


def solve(system, constraint="mean", linear=None):
    """Solve an assembled :class:`~gwgstokes.assembly.GlobalSystem`.

    With a point ``constraint`` the pressure is pinned there and then
    shifted to zero mean.
    """
    config = system.disc.config
    linear = linear or build_linear_system(system, constraint)
    z, rel, refined = solve_linear(linear, config)
    u, p, lam = linear.expand(z)
    nn = system.disc.nn
    p = p.reshape(-1, nn)
    if not isinstance(constraint, str):
        c = mean_vector(system.disc)
        area = system.disc.mesh.total_area
        p = p - (c @ p.ravel()) / area * c.reshape(-1, nn)
    return Solution(u=u, p=p, multiplier=float(lam[0]) if lam.size else 0.0,
                    residual=rel, refined=refined, system=system, linear=linear)


def solve_stokes(mesh, config, spec, constraint="mean", check=True):
    """Assemble and solve the scheme on ``mesh``.

    ``check`` refuses parameter combinations outside the admissible regime
    (``mu = 0`` with ``n > j``) before any work is done.
    """
    if check:
        check_regime(config)
    system = assemble_system(mesh, config, spec)
    return solve(system, constraint)
