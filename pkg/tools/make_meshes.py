"""Regenerate the MSH fixtures shipped in ``gwgstokes/data/meshes``.

A small force-based mesher in the spirit of DistMesh: boundary nodes are
fixed at the requested spacing, interior nodes relax under edge springs and
are retriangulated with Delaunay.  Output is deterministic for a given seed.

    python3 tools/make_meshes.py [outdir]
"""
import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from gwgstokes.cases import CHANNEL_HEIGHT, INFLOW, OBSTACLE, OUTFLOW, WALL
from gwgstokes.mesh import BOTTOM, LEFT, RIGHT, TOP, Mesh, mesh_quality, write_gmsh

LENGTH = 8.0
RADIUS = 0.25
CIRCLES = {1: [(2.25, 2.25)], 3: [(2.25, 2.25), (4.0, 1.25), (4.0, 3.25)]}
SLOTS = [(1.5, 2.0), (2.5, 3.0)]
SQUARE_LEVELS = (5, 10, 20, 40, 80)


def d_rect(p, x0, x1, y0, y1):
    dx = np.maximum(x0 - p[:, 0], p[:, 0] - x1)
    dy = np.maximum(y0 - p[:, 1], p[:, 1] - y1)
    outside = np.hypot(np.maximum(dx, 0), np.maximum(dy, 0))
    return np.where((dx > 0) | (dy > 0), outside, np.maximum(dx, dy))


def d_circles(p, centres):
    return np.min([np.hypot(p[:, 0] - cx, p[:, 1] - cy) - RADIUS for cx, cy in centres], axis=0)


def sample_segment(a, b, size, breaks=()):
    """Points from ``a`` to ``b`` (``b`` excluded) with local spacing ``size``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    length = np.linalg.norm(b - a)
    stops = sorted({0.0, 1.0, *[s for s in breaks if 0 < s < 1]})
    out = []
    for s0, s1 in zip(stops[:-1], stops[1:]):
        # number of nodes from the integral of 1/size along the piece
        t = np.linspace(s0, s1, 64)
        density = 1.0 / size(a + np.outer(t, b - a))
        n = max(1, int(round(np.trapezoid(density, t) * length)))
        out.extend(np.linspace(s0, s1, n + 1)[:-1])
    return a + np.outer(out, b - a)


def relax(fixed, dist, size, h0, bbox, seed=0, iters=400):
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = bbox
    n_try = int(2 / np.sqrt(3) * (x1 - x0) * (y1 - y0) / h0**2)
    p = np.column_stack([rng.uniform(x0, x1, n_try), rng.uniform(y0, y1, n_try)])
    p = p[dist(p) < -0.5 * h0]
    r0 = 1.0 / size(p) ** 2
    p = p[rng.uniform(size=len(p)) < r0 / r0.max()]
    nf = len(fixed)
    pts = np.vstack([fixed, p])
    old = np.inf
    for _ in range(iters):
        if np.max(np.linalg.norm(pts - old, axis=1)) > 0.1 * h0:
            old = pts.copy()
            tri = Delaunay(pts).simplices
            tri = tri[dist(pts[tri].mean(axis=1)) < -1e-3 * h0]
            bars = np.unique(np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]]), axis=1), axis=0)
        vec = pts[bars[:, 0]] - pts[bars[:, 1]]
        L = np.linalg.norm(vec, axis=1)
        hb = size((pts[bars[:, 0]] + pts[bars[:, 1]]) / 2)
        L0 = hb * 1.2 * np.sqrt(np.sum(L**2) / np.sum(hb**2))
        F = np.maximum(L0 - L, 0)
        Fv = (F / L)[:, None] * vec
        move = np.zeros_like(pts)
        np.add.at(move, bars[:, 0], Fv)
        np.add.at(move, bars[:, 1], -Fv)
        move[:nf] = 0
        pts = pts + 0.2 * move
        # keep free nodes off the fixed boundary layer
        d = dist(pts[nf:])
        bad = d > -0.45 * size(pts[nf:])
        if bad.any():
            q = pts[nf:][bad]
            eps = 1e-7 * h0
            gx = (dist(q + [eps, 0]) - dist(q)) / eps
            gy = (dist(q + [0, eps]) - dist(q)) / eps
            shift = d[bad] + 0.45 * size(q)
            pts[nf:][bad] = q - shift[:, None] * np.column_stack([gx, gy])
    tri = Delaunay(pts).simplices
    tri = tri[dist(pts[tri].mean(axis=1)) < -1e-3 * h0]
    used = np.unique(tri)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return pts[used], remap[tri]


def square(level):
    h0 = 1.0 / level
    size = lambda p: np.full(len(np.atleast_2d(p)), h0)
    corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    fixed = np.vstack([sample_segment(corners[i], corners[(i + 1) % 4], size) for i in range(4)])
    dist = lambda p: d_rect(p, 0, 1, 0, 1)
    pts, tri = relax(fixed, dist, size, h0, (0, 1, 0, 1), seed=level)
    tags = {}
    for a, b in _boundary(tri):
        mx, my = (pts[a] + pts[b]) / 2
        tags[(a, b)] = BOTTOM if my < 1e-9 else TOP if my > 1 - 1e-9 else LEFT if mx < 1e-9 else RIGHT
    return Mesh(pts, tri, tags, h=h0)


def obstacles(count, hmin=0.05, hmax=0.2, grade=0.25):
    centres = CIRCLES[count]
    H = CHANNEL_HEIGHT
    size = lambda p: np.minimum(hmax, hmin + grade * np.maximum(d_circles(np.atleast_2d(p), centres), 0))
    dist = lambda p: np.maximum(d_rect(p, 0, LENGTH, 0, H), -d_circles(p, centres))
    corners = [(0, 0), (LENGTH, 0), (LENGTH, H), (0, H)]
    parts = []
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        breaks = [1 - y / H for s in SLOTS for y in s] if i == 3 else ()
        parts.append(sample_segment(a, b, size, breaks))
    for cx, cy in centres:
        n = int(np.ceil(2 * np.pi * RADIUS / hmin))
        th = 2 * np.pi * np.arange(n) / n
        parts.append(np.column_stack([cx + RADIUS * np.cos(th), cy + RADIUS * np.sin(th)]))
    fixed = np.vstack(parts)
    pts, tri = relax(fixed, dist, size, hmin, (0, LENGTH, 0, H), seed=count)
    tags = {}
    for a, b in _boundary(tri):
        mx, my = (pts[a] + pts[b]) / 2
        if d_circles(np.array([[mx, my]]), centres)[0] < 0.05:
            tag = OBSTACLE
        elif mx < 1e-9:
            tag = INFLOW if any(lo < my < hi for lo, hi in SLOTS) else WALL
        elif mx > LENGTH - 1e-9:
            tag = OUTFLOW
        else:
            tag = WALL
        tags[(a, b)] = tag
    return Mesh(pts, tri, tags)


def _boundary(tri):
    edges = np.sort(np.vstack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return [tuple(e) for e in uniq[counts == 1]]


SQUARE_NAMES = {BOTTOM: (1, "bottom"), RIGHT: (1, "right"), TOP: (1, "top"), LEFT: (1, "left"), 100: (2, "domain")}
OBSTACLE_NAMES = {OBSTACLE: (1, "obstacle"), INFLOW: (1, "inflow"), OUTFLOW: (1, "outflow"),
                  WALL: (1, "wall"), 100: (2, "domain")}


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for level in SQUARE_LEVELS:
        mesh = square(level)
        write_gmsh(mesh, outdir / f"square_h{level}.msh", SQUARE_NAMES)
        print(f"square_h{level}: {mesh.n_triangles} triangles, min angle {mesh_quality(mesh).min_angle:.1f}")
    for count in CIRCLES:
        mesh = obstacles(count)
        write_gmsh(mesh, outdir / f"cylinder{count}.msh", OBSTACLE_NAMES)
        print(f"cylinder{count}: {mesh.n_triangles} triangles, min angle {mesh_quality(mesh).min_angle:.1f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parents[1] / "src/gwgstokes/data/meshes")
