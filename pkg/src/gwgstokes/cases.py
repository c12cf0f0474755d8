"""Benchmark problems: manufactured solutions, lid-driven cavity and obstacle flows."""
from importlib import resources

import numpy as np
import sympy

from .assembly import ProblemSpec
from .mesh import BOTTOM, LEFT, RIGHT, TOP, read_gmsh

X, Y = sympy.symbols("x y", real=True)

# physical tags used by the shipped obstacle meshes
WALL, OBSTACLE, INFLOW, OUTFLOW = 5, 2, 3, 4

ALPHA = 100.0
CHANNEL_HEIGHT = 4.5

CASE2_LEVELS = (10, 20, 40, 80)


def _lambdify(expr):
    f = sympy.lambdify((X, Y), expr, "numpy")
    if expr.free_symbols:
        return f
    value = float(expr)
    return lambda x, y: np.full(np.shape(x), value)


def _vector(exprs):
    fs = [_lambdify(e) for e in exprs]
    return lambda x, y: tuple(f(x, y) for f in fs)


def _tensor(rows):
    fs = [[_lambdify(e) for e in row] for row in rows]
    return lambda x, y: tuple(tuple(f(x, y) for f in row) for row in fs)


def manufactured(u, p, viscosity=None, name="manufactured"):
    """Problem whose force and boundary data come from exact ``u`` and ``p``.

    ``u`` is a pair and ``p`` a single sympy expression in ``X, Y``;
    ``viscosity`` an optional 2x2 nested sequence of expressions.
    """
    u = [sympy.sympify(c) for c in u]
    p = sympy.sympify(p)
    A = sympy.eye(2) if viscosity is None else sympy.Matrix(viscosity)
    grad = [[sympy.diff(uc, v) for v in (X, Y)] for uc in u]
    flux = [[sum(A[d, e] * grad[c][e] for e in range(2)) for d in range(2)] for c in range(2)]
    force = [sympy.simplify(-sum(sympy.diff(flux[c][d], v) for d, v in enumerate((X, Y)))
                            + sympy.diff(p, (X, Y)[c])) for c in range(2)]
    visc = None if viscosity is None else _tensor(A.tolist())
    exact_u = _vector(u)
    return ProblemSpec(
        force=_vector(force),
        dirichlet=exact_u,
        viscosity=visc,
        exact_u=exact_u,
        exact_p=_lambdify(p),
        exact_grad_u=_tensor(grad),
        name=name,
    )


def case1():
    """Polynomial solution on the unit square."""
    return manufactured((X**2 * Y, -X * Y**2), 10 * (2 * X - 1) * (2 * Y - 1), name="case1")


def case2():
    """Trigonometric velocity with a non-zero-mean pressure on the unit square."""
    u = (-sympy.cos(X) * sympy.sin(Y), sympy.sin(X) * sympy.cos(Y))
    return manufactured(u, sympy.exp(X**2) * sympy.sin(Y), name="case2")


def cavity(lid=(1.0, 0.0)):
    """Lid-driven cavity: ``u = lid`` on ``y = 1``, no slip on the other sides."""
    zero = (0.0, 0.0)
    return ProblemSpec(dirichlet={TOP: lid, BOTTOM: zero, LEFT: zero, RIGHT: zero}, name="cavity")


def cylinder(channel=False):
    """Stationary flow past circular obstacles in ``(0, 8) x (0, 4.5)``.

    Without ``channel`` the whole outer boundary carries ``u = (1, 0)``.
    With ``channel`` the inflow slots get ``(alpha, 0)``, the right side
    ``(alpha / 4.5, 0)`` and the remaining outer walls no slip.
    """
    zero = (0.0, 0.0)
    if channel:
        data = {INFLOW: (ALPHA, 0.0), OUTFLOW: (ALPHA / CHANNEL_HEIGHT, 0.0), WALL: zero, OBSTACLE: zero}
        name = "cylinder_channel"
    else:
        one = (1.0, 0.0)
        data = {INFLOW: one, OUTFLOW: one, WALL: one, OBSTACLE: zero}
        name = "cylinder"
    return ProblemSpec(dirichlet=data, name=name)


def mesh_path(name):
    return resources.files("gwgstokes.data.meshes").joinpath(name)


def case2_mesh(level):
    """Unstructured unit-square mesh with characteristic length ``1/level``."""
    with resources.as_file(mesh_path(f"square_h{level}.msh")) as path:
        return read_gmsh(path, h=1.0 / level)


def obstacle_mesh(count):
    """Shipped mesh around one or three circular obstacles."""
    with resources.as_file(mesh_path(f"cylinder{count}.msh")) as path:
        return read_gmsh(path)
