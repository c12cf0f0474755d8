"""Property checks behind ``gwgstokes verify``.

Each check returns a :class:`CheckResult`; :func:`run_all` collects them.
"""
from dataclasses import dataclass

import numpy as np

from .assembly import assemble_system, build_linear_system
from .cases import case1
from .femspace import Discretization, ElementConfig, RegimeError, check_regime, project_q0, project_qb
from .mesh import Mesh, uniform_triangulation
from .solver import SingularSystemError, solve_linear
from .weakops import build_operators, commuting_check, identity_check

# element tuples of the numerical experiments, with default parameters
ELEMENTS = ("1,0,1,0,0", "2,1,1,0,0", "2,1,1,1,1", "2,1,0,1,1", "2,1,0,2,2")
IDENTITY_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


def random_triangles(count, rng=None, min_angle=15.0):
    """Single-triangle meshes with vertices in the unit square and no sliver angles."""
    rng = np.random.default_rng(rng)
    out = []
    while len(out) < count:
        v = rng.uniform(size=(3, 2))
        mesh = Mesh(v, [[0, 1, 2]])
        a, b, c = (np.linalg.norm(v[i] - v[j]) for i, j in ((1, 2), (0, 2), (0, 1)))
        cos = np.clip([(b * b + c * c - a * a) / (2 * b * c), (a * a + c * c - b * b) / (2 * a * c),
                       (a * a + b * b - c * c) / (2 * a * b)], -1, 1)
        if np.degrees(np.arccos(cos)).min() >= min_angle:
            out.append(mesh)
    return out


def check_identity(elements=ELEMENTS, n_triangles=3, n_draws=100, rng=0, operators=None):
    """``(grad_w v, phi) = -(v_0, div phi) + <v_b, phi n>`` on random triangles.

    ``operators`` optionally maps a :class:`Discretization` to a replacement
    operator set (used to inject faults).
    """
    rng = np.random.default_rng(rng)
    worst = 0.0
    for el in elements:
        for mesh in random_triangles(n_triangles, rng):
            disc = Discretization(mesh, ElementConfig.from_tuple(el))
            ops = build_operators(disc) if operators is None else operators(disc)
            worst = max(worst, float(identity_check(disc, ops, n_draws, rng).max()))
    return CheckResult("weak gradient identity for discrete v", worst <= IDENTITY_TOL, f"max residual {worst:.2e}")


def check_commuting(elements=ELEMENTS, rng=0):
    """``(grad_w Q_h w, phi) = (grad w, phi) + ((I - Q_0) w, div phi)`` for a cubic ``w``."""
    w = lambda x, y: (x**3 - 2 * x * y + y**2, x * y**2 + 3 * y**3 - x)
    grad = lambda x, y: ((3 * x**2 - 2 * y, 2 * y - 2 * x), (y**2 - 1, 2 * x * y + 9 * y**2))
    mesh = uniform_triangulation(2)
    worst = 0.0
    for el in elements:
        disc = Discretization(mesh, ElementConfig.from_tuple(el))
        worst = max(worst, float(commuting_check(disc, w, grad, rng=rng).max()))
    return CheckResult("commuting identity for Q_h w", worst <= IDENTITY_TOL, f"max residual {worst:.2e}")


def check_idempotence(elements=ELEMENTS):
    """Projecting a projection returns the same coefficients."""
    f = lambda x, y: np.sin(3 * x) * np.exp(y)
    mesh = uniform_triangulation(3)
    worst = 0.0
    for el in elements:
        disc = Discretization(mesh, ElementConfig.from_tuple(el))
        c = project_q0(disc, f)
        vals = np.einsum("ti,tqi->tq", c, disc.phi[..., : disc.nk])
        again = np.einsum("tq,tq,tqi->ti", disc.qw, vals, disc.phi[..., : disc.nk])
        cb = project_qb(disc, f)
        bvals = np.einsum("ea,eqa->eq", cb, disc.chi)
        bagain = np.einsum("eq,eq,eqa->ea", disc.ew, bvals, disc.chi)
        worst = max(worst, np.abs(again - c).max(), np.abs(bagain - cb).max())
    return CheckResult("projection idempotence (Q_0, Q_b)", worst <= IDENTITY_TOL, f"max change {worst:.2e}")


def check_forms(elements=ELEMENTS, n=4):
    """Symmetry and positive semi-definiteness of the velocity and pressure blocks."""
    worst_sym, worst_eig = 0.0, 0.0
    for el in elements:
        system = assemble_system(uniform_triangulation(n), ElementConfig.from_tuple(el), case1())
        for M in (system.A, system.S):
            D = M.toarray()
            scale = max(np.abs(D).max(), 1.0)
            worst_sym = max(worst_sym, np.abs(D - D.T).max() / scale)
            if D.size:
                worst_eig = min(worst_eig, np.linalg.eigvalsh((D + D.T) / 2).min() / scale)
        K = system.saddle_matrix()
        worst_sym = max(worst_sym, abs(K - K.T).max() / max(abs(K).max(), 1.0))
    ok = worst_sym <= 1e-12 and worst_eig >= -1e-12
    return CheckResult("symmetric PSD forms, symmetric saddle matrix", ok,
                       f"asymmetry {worst_sym:.1e}, min eigenvalue {worst_eig:.1e}")


def check_solvability(elements=ELEMENTS, n=8):
    """The constrained system is nonsingular for each element; ``mu = 0`` with ``n > j`` is refused."""
    failures = []
    for el in elements:
        config = ElementConfig.from_tuple(el)
        try:
            system = assemble_system(uniform_triangulation(n), config, case1())
            _, rel, _ = solve_linear(build_linear_system(system), config)
            if rel > 1e-10:
                failures.append(f"{el} residual {rel:.1e}")
        except SingularSystemError as exc:
            failures.append(f"{el}: {exc}")
    refused = False
    try:
        check_regime(ElementConfig(2, 1, 1, 0, 2, mu=0.0))
    except RegimeError:
        refused = True
    if not refused:
        failures.append("(2,1,1,0,2) with mu=0 was not refused")
    detail = "; ".join(failures) if failures else f"{len(elements)} elements nonsingular, (2,1,1,0,2) mu=0 refused"
    return CheckResult("solvability matrix", not failures, detail)


def run_all():
    return [check_identity(), check_commuting(), check_idempotence(), check_forms(), check_solvability()]
