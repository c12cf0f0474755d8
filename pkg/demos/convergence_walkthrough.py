"""
Weak Galerkin Stokes in a few steps
===================================

Build a mesh, pick an element, solve a manufactured problem and watch the
errors shrink as the mesh is refined.

    python demos/convergence_walkthrough.py
"""
import numpy as np

from gwgstokes.cases import case1
from gwgstokes.femspace import ElementConfig
from gwgstokes.mesh import mesh_quality, uniform_triangulation
from gwgstokes.postprocess import compute_errors, convergence_study
from gwgstokes.solver import solve_stokes

# %% a uniform mesh of the unit square, each cell cut along "/"
mesh = uniform_triangulation(8)
print(mesh.n_triangles, "triangles,", mesh.n_edges, "edges, h =", mesh.h)
print("min angle", mesh_quality(mesh).min_angle)

# %% element degrees (k, j, l, m, n): quadratic interior velocity, linear
# edge velocity, linear weak gradient correction, linear divergence and pressure
config = ElementConfig.from_tuple("2,1,1,1,1")
print(config.label(), config.flags())

# %% one solve; the pressure comes back with zero mean
spec = case1()
sol = solve_stokes(mesh, config, spec)
print("relative residual", sol.residual)
print("pressure integral", sol.pressure_integral())
print(compute_errors(sol))

# %% refine three times and read off the orders
table, reports = convergence_study([uniform_triangulation(n) for n in (4, 8, 16, 32)], config, spec)
print(table.format())

# the orders settle near 2 (energy), 3 (L2 velocity) and 2 (L2 pressure)
print("final orders", np.round(table.final_orders(), 2))

# %% a lowest-order element for comparison
low = ElementConfig(1, 0, 1, 0, 0)
table, _ = convergence_study([uniform_triangulation(n) for n in (8, 16, 32)], low, spec)
print(table.format())
