"""
Lid-driven cavity and flow around obstacles
===========================================

Solve the two flows without exact solutions and write VTK files for a
viewer such as ParaView.

    python demos/cavity_and_obstacles.py [outdir]
"""
import sys
from pathlib import Path

from gwgstokes.cases import cavity, cylinder, obstacle_mesh
from gwgstokes.femspace import ElementConfig
from gwgstokes.mesh import uniform_triangulation
from gwgstokes.postprocess import boundary_deviation, export_vtk
from gwgstokes.solver import solve_stokes

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
out.mkdir(parents=True, exist_ok=True)

# %% cavity: the lid moves right, the pressure is pinned at the origin and
# shifted to zero mean afterwards
mesh = uniform_triangulation(32)
sol = solve_stokes(mesh, ElementConfig(2, 1, 0, 1, 1), cavity(), constraint=(0.0, 0.0))
export_vtk(sol, out / "cavity.vtk", title="lid-driven cavity")

# the primary vortex turns about a point close to (0.5, 0.76), so the velocity there is small
t = mesh.locate(0.5, 0.75)
print("velocity near (0.5, 0.75):", sol.u0[t, :, 0])

# %% three obstacles in a channel fed through two slots on the left
mesh = obstacle_mesh(3)
sol = solve_stokes(mesh, ElementConfig(2, 1, 1, 1, 1), cylinder(channel=True))
print(mesh.n_triangles, "triangles, boundary mismatch", boundary_deviation(sol))
export_vtk(sol, out / "obstacles.vtk", title="channel with three obstacles")
