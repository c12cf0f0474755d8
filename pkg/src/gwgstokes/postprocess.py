"""Projection-based error norms, convergence tables and VTK export."""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import CHUNK, dirichlet_values, mean_vector
from .femspace import _evaluate, project_q0
from .solver import RESIDUAL_TOL, solve_stokes
from .weakops import interpolate

CSV_HEADER = ["h", "energy_err", "energy_order", "l2u_err", "l2u_order", "l2p_err", "l2p_order"]
NOISE_FLOOR = 1e2 * RESIDUAL_TOL


class MissingExactSolution(ValueError):
    pass


@dataclass
class ErrorReport:
    h: float
    energy: float
    l2_velocity: float
    l2_pressure: float
    # ||p - p_h|| against the unprojected zero-mean pressure; diagnostic only
    l2_pressure_raw: float = math.nan

    def as_tuple(self):
        return (self.energy, self.l2_velocity, self.l2_pressure)


def _require(spec, *names):
    for name in names:
        if getattr(spec, name) is None:
            raise MissingExactSolution(f"problem {spec.name!r} has no {name}")


def velocity_error_vector(solution, spec=None):
    """Local vectors ``(T, ndof)`` of ``e = Q_h u - u_h``."""
    spec = spec or solution.system.spec
    _require(spec, "exact_u")
    disc = solution.disc
    return interpolate(disc, spec.exact_u) - solution.system.dofmap.local(solution.u)


def energy_form(disc, ops, e, spec=None):
    """``(A grad_w e, grad_w e) + s1(e, e)`` for local vectors ``e (T, ndof)``, by quadrature."""
    total = 0.0
    T = disc.n_triangles
    for start in range(0, T, CHUNK):
        sl = slice(start, min(start + CHUNK, T))
        g = np.einsum("tqcdx,tx->tqcd", ops.gq(disc, sl), e[sl])
        if spec is None or spec.viscosity is None:
            total += np.einsum("tq,tqcd,tqcd->", disc.qw[sl], g, g)
        else:
            A = spec.viscosity_at(disc.qpts[sl])
            total += np.einsum("tq,tqcd,tqde,tqce->", disc.qw[sl], g, A, g)
    # stabilizer: mismatch evaluated at edge points
    chi = disc.chi[disc.mesh.tri_edges]
    mis = np.einsum("tena,tecax,tx->tenc", chi, ops.mismatch, e)
    weight = np.asarray(disc.mesh.diameters) ** (-disc.config.gamma)
    total += np.einsum("t,ten,tenc,tenc->", weight, disc.local_ew, mis, mis)
    return float(total)


def energy_norm_error(solution, spec=None):
    """``|||Q_h u - u_h|||``."""
    spec = spec or solution.system.spec
    e = velocity_error_vector(solution, spec)
    return math.sqrt(max(energy_form(solution.disc, solution.system.ops, e, spec), 0.0))


def zero_mean(disc, p):
    """``p`` shifted by its mean over the mesh."""
    area = disc.mesh.total_area
    mean = float(np.einsum("tq,tq->", disc.qw, _evaluate(p, disc.qpts))) / area
    return lambda x, y: np.asarray(p(x, y), dtype=float) - mean


def l2_errors(solution, spec=None):
    """``(||Q_0 u - u_0||, ||Q_h^p p - p_h||)`` by element quadrature.

    The exact pressure is shifted to zero mean before projection.
    """
    spec = spec or solution.system.spec
    _require(spec, "exact_u", "exact_p")
    disc = solution.disc
    nk, nn = disc.nk, disc.nn
    du = project_q0(disc, spec.exact_u) - solution.u0
    vals = np.einsum("tci,tqi->tqc", du, disc.phi[..., :nk])
    vel = np.einsum("tq,tqc,tqc->", disc.qw, vals, vals)
    dp = project_q0(disc, zero_mean(disc, spec.exact_p), degree=disc.config.n) - solution.p
    pv = np.einsum("ti,tqi->tq", dp, disc.phi[..., :nn])
    pres = np.einsum("tq,tq,tq->", disc.qw, pv, pv)
    return math.sqrt(vel), math.sqrt(pres)


def raw_pressure_error(solution, spec=None):
    """``||p - p_h||`` with ``p`` shifted to zero mean, by element quadrature."""
    spec = spec or solution.system.spec
    _require(spec, "exact_p")
    disc = solution.disc
    exact = _evaluate(zero_mean(disc, spec.exact_p), disc.qpts)
    diff = exact - np.einsum("ti,tqi->tq", solution.p, disc.phi[..., : disc.nn])
    return math.sqrt(np.einsum("tq,tq,tq->", disc.qw, diff, diff))


def compute_errors(solution, spec=None):
    spec = spec or solution.system.spec
    vel, pres = l2_errors(solution, spec)
    return ErrorReport(solution.mesh.h, energy_norm_error(solution, spec), vel, pres,
                       raw_pressure_error(solution, spec))


@dataclass
class ConvergenceTable:
    """Errors per level with observed orders ``log2(e_prev / e)``.

    Orders are ``nan`` on the first row, when ``h`` is not halved, or when
    either error sits below the noise floor; ``unreliable`` records the
    last case as ``(row, column)`` pairs.
    """

    h: list
    errors: np.ndarray
    orders: np.ndarray
    unreliable: set = field(default_factory=set)

    def final_orders(self):
        return tuple(float(o) for o in self.orders[-1])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for h, err, order in zip(self.h, self.errors, self.orders):
            row = [f"{h:.10g}"]
            for e, o in zip(err, order):
                row += [f"{e:.6e}", "" if math.isnan(o) else f"{o:.4f}"]
            w.writerow(row)
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def format(self):
        lines = [f"{'h':>10} | {'energy':>10} {'ord':>5} | {'L2 u':>10} {'ord':>5} | {'L2 p':>10} {'ord':>5}"]
        for h, err, order in zip(self.h, self.errors, self.orders):
            cells = [f"{'1/%g' % (1 / h) if h < 1 else h:>10}"]
            for e, o in zip(err, order):
                cells.append(f"{e:10.4e} {'' if math.isnan(o) else f'{o:5.2f}':>5}")
            lines.append(" | ".join(cells))
        return "\n".join(lines)


def observed_orders(h, errors, noise_floor=NOISE_FLOOR):
    """Build a :class:`ConvergenceTable` from mesh sizes and error rows."""
    h = [float(v) for v in h]
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    orders = np.full(errors.shape, np.nan)
    unreliable = set()
    for i in range(1, len(h)):
        if not math.isclose(h[i - 1] / h[i], 2.0, rel_tol=1e-6):
            continue
        for c in range(errors.shape[1]):
            prev, cur = errors[i - 1, c], errors[i, c]
            if prev <= noise_floor or cur <= noise_floor:
                unreliable.add((i, c))
                continue
            orders[i, c] = math.log2(prev / cur)
    return ConvergenceTable(h, errors, orders, unreliable)


def table_from_reports(reports):
    return observed_orders([r.h for r in reports], [r.as_tuple() for r in reports])


def boundary_deviation(solution):
    """Largest difference between boundary edge coefficients and ``Q_b g``."""
    bnd, values = dirichlet_values(solution.disc, solution.system.spec)
    if len(bnd) == 0:
        return 0.0
    return float(np.abs(solution.ub[bnd] - values).max())


def convergence_study(meshes, config, spec, callback=None):
    """Solve on each mesh in turn and tabulate errors and observed orders.

    ``callback(solution, report)`` is called after every level.
    """
    reports = []
    for mesh in meshes:
        solution = solve_stokes(mesh, config, spec)
        reports.append(compute_errors(solution, spec))
        if callback is not None:
            callback(solution, reports[-1])
    return table_from_reports(reports), reports


def vertex_velocity(solution):
    """Interior velocity averaged over the triangles around each vertex, ``(V, 2)``."""
    mesh = solution.mesh
    disc = solution.disc
    pts = mesh.vertices[mesh.triangles]                       # (T, 3, 2)
    phi = disc.basis.evaluate(pts)[..., : disc.nk]
    vals = np.einsum("tci,tvi->tvc", solution.u0, phi)
    out = np.zeros((mesh.n_vertices, 2))
    count = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.triangles.ravel(), vals.reshape(-1, 2))
    np.add.at(count, mesh.triangles.ravel(), 1.0)
    return out / count[:, None]


def cell_pressure(solution):
    """Pressure average of each triangle."""
    disc = solution.disc
    c = mean_vector(disc).reshape(-1, disc.nn)
    return np.einsum("tr,tr->t", c, solution.p) / np.asarray(solution.mesh.areas)


def cell_velocity(solution):
    """Interior velocity average of each triangle, ``(T, 2)``."""
    disc = solution.disc
    c = np.einsum("tq,tqr->tr", disc.qw, disc.phi[..., : disc.nk])
    return np.einsum("tr,tcr->tc", c, solution.u0) / np.asarray(solution.mesh.areas)[:, None]


def export_vtk(solution, path, title="gwgstokes solution"):
    """Legacy ASCII VTK unstructured grid with point velocity and cell pressure."""
    mesh = solution.mesh
    uv = vertex_velocity(solution)
    pc = cell_pressure(solution)
    uc = cell_velocity(solution)
    V, T = mesh.n_vertices, mesh.n_triangles
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {V} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.12g} {y:.12g} 0\n")
        fh.write(f"CELLS {T} {4 * T}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {T}\n")
        fh.write("5\n" * T)
        fh.write(f"POINT_DATA {V}\nVECTORS velocity double\n")
        for u1, u2 in uv:
            fh.write(f"{u1:.12g} {u2:.12g} 0\n")
        fh.write(f"CELL_DATA {T}\nSCALARS pressure double 1\nLOOKUP_TABLE default\n")
        for p in pc:
            fh.write(f"{p:.12g}\n")
        fh.write("VECTORS cell_velocity double\n")
        for u1, u2 in uc:
            fh.write(f"{u1:.12g} {u2:.12g} 0\n")


def read_vtk(path):
    """Parse a legacy ASCII file written by :func:`export_vtk` into arrays."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    out = {"point_data": {}, "cell_data": {}}
    i = 4
    section = None
    while i < len(tokens):
        parts = tokens[i].split()
        i += 1
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = np.loadtxt(tokens[i:i + n], ndmin=2)
            i += n
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = np.loadtxt(tokens[i:i + n], dtype=np.int64, ndmin=2)
            i += n
        elif key == "CELL_TYPES":
            n = int(parts[1])
            out["cell_types"] = np.array([int(t) for t in tokens[i:i + n]])
            i += n
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = "point_data" if key == "POINT_DATA" else "cell_data"
            count = int(parts[1])
        elif key == "VECTORS":
            out[section][parts[1]] = np.loadtxt(tokens[i:i + count], ndmin=2)
            i += count
        elif key == "SCALARS":
            i += 1  # LOOKUP_TABLE
            out[section][parts[1]] = np.loadtxt(tokens[i:i + count], ndmin=1)
            i += count
        else:
            raise ValueError(f"unexpected VTK keyword {key!r}")
    return out
