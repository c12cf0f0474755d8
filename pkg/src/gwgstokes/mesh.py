"""Conforming triangular meshes: construction, Gmsh I/O and quality checks."""
import csv
import os
from dataclasses import dataclass

import numpy as np

INTERIOR = 0
UNTAGGED = -1

# uniform_triangulation side labels
BOTTOM, RIGHT, TOP, LEFT = 1, 2, 3, 4


class InvalidDomainError(ValueError):
    pass


class MeshError(ValueError):
    pass


class GmshParseError(ValueError):
    """Malformed or unsupported MSH input; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class Mesh:
    """Immutable triangulation with edge connectivity.

    Parameters
    ----------
    vertices : (V, 2) array_like
    triangles : (T, 3) array_like of int
    boundary_tags : dict, optional
        Maps a vertex pair ``(a, b)`` (either order) of a boundary edge to an
        integer label.  Boundary edges missing from the map are tagged
        ``UNTAGGED``.
    h : float, optional
        Nominal mesh parameter reported in convergence tables.  Defaults to
        the largest element diameter.
    orient : bool
        Reorder vertices of clockwise triangles.  Pass ``False`` only to
        inspect defective input.

    Attributes
    ----------
    edges : (E, 2) int
        Vertex ids of each edge, smaller id first.
    edge_owners : (E, 2) int
        Triangles sharing the edge, lower id first; ``-1`` marks the missing
        neighbour of a boundary edge.
    tri_edges : (T, 3) int
        Local edge ``i`` is the side opposite local vertex ``i``.
    tri_edge_signs : (T, 3) int
        +1 when the counter-clockwise traversal of the triangle runs along
        the edge from ``edges[e, 0]`` to ``edges[e, 1]``.
    tri_normal_signs : (T, 3) float
        Multiplier turning ``edge_normals`` into the outward normal of the
        triangle.
    edge_normals : (E, 2)
        Unit normal of each edge, outward from ``edge_owners[:, 0]``.
    """

    def __init__(self, vertices, triangles, boundary_tags=None, h=None, orient=True):
        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (V, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (T, 3)")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("vertex coordinates must be finite")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError("triangle references a vertex id out of range")
        if triangles.size:
            span = np.ptp(vertices, axis=0).max() if len(vertices) > 1 else 1.0
            flat = np.abs(_signed_areas(vertices, triangles)) <= 1e-14 * span**2
            if flat.any():
                raise MeshError(f"triangle {int(np.argmax(flat))} has zero area")

        if orient:
            cw = _signed_areas(vertices, triangles) < 0
            triangles[cw] = triangles[cw][:, [0, 2, 1]]

        self.vertices = vertices
        self.triangles = triangles
        self._build_edges()
        self._build_geometry()
        self._tag_boundary(boundary_tags or {})
        self.h = float(self.diameters.max()) if h is None else float(h)

        for arr in vars(self).values():
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    def _build_edges(self):
        tri = self.triangles
        T = len(tri)
        # local edge i runs from vertex i+1 to vertex i+2 (counter-clockwise)
        start = tri[:, [1, 2, 0]]
        end = tri[:, [2, 0, 1]]
        pairs = np.stack([start, end], axis=-1).reshape(-1, 2)
        key = np.sort(pairs, axis=1)
        edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")

        tri_of = np.repeat(np.arange(T), 3)
        owners = -np.ones((len(edges), 2), dtype=np.int64)
        order = np.lexsort((tri_of, inverse))
        inv_sorted = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv_sorted[1:] != inv_sorted[:-1]
        owners[inv_sorted[first], 0] = tri_of[order][first]
        owners[inv_sorted[~first], 1] = tri_of[order][~first]

        self.edges = edges
        self.edge_owners = owners
        self.tri_edges = inverse.reshape(T, 3)
        self.tri_edge_signs = np.where(pairs[:, 0] == edges[inverse, 0], 1, -1).reshape(T, 3)
        is_first_owner = owners[self.tri_edges, 0] == np.arange(T)[:, None]
        self.tri_normal_signs = np.where(is_first_owner, 1.0, -1.0)

    def _build_geometry(self):
        v = self.vertices
        tri = self.triangles
        self.areas = 0.5 * np.abs(_signed_areas(v, tri))
        self.signed_areas = 0.5 * _signed_areas(v, tri)
        self.centroids = v[tri].mean(axis=1)

        d = v[self.edges[:, 1]] - v[self.edges[:, 0]]
        self.edge_lengths = np.hypot(d[:, 0], d[:, 1])
        self.edge_midpoints = 0.5 * (v[self.edges[:, 0]] + v[self.edges[:, 1]])
        self.diameters = self.edge_lengths[self.tri_edges].max(axis=1)

        # owner 0 traverses the edge with sign s; its outward normal is s*(dy, -dx)/L
        T = len(tri)
        s0 = np.zeros(len(self.edges))
        rows, cols = np.nonzero(self.edge_owners[self.tri_edges, 0] == np.arange(T)[:, None])
        s0[self.tri_edges[rows, cols]] = self.tri_edge_signs[rows, cols]
        n = np.column_stack([d[:, 1], -d[:, 0]]) / self.edge_lengths[:, None]
        self.edge_normals = n * s0[:, None]

    def _tag_boundary(self, boundary_tags):
        tags = np.full(len(self.edges), INTERIOR, dtype=np.int64)
        bnd = self.edge_owners[:, 1] < 0
        tags[bnd] = UNTAGGED
        if boundary_tags:
            lookup = {tuple(sorted(map(int, k))): int(t) for k, t in boundary_tags.items()}
            for e in np.flatnonzero(bnd):
                tags[e] = lookup.get((int(self.edges[e, 0]), int(self.edges[e, 1])), UNTAGGED)
        self.edge_tags = tags

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_owners[:, 1] < 0)

    @property
    def interior_edges(self):
        return np.flatnonzero(self.edge_owners[:, 1] >= 0)

    @property
    def total_area(self):
        return float(self.areas.sum())

    def boundary_labels(self):
        return sorted(set(self.edge_tags[self.boundary_edges].tolist()))

    def edges_with_tag(self, tag):
        return np.flatnonzero((self.edge_tags == tag) & (self.edge_owners[:, 1] < 0))

    def locate(self, x, y, tol=1e-12):
        """Id of a triangle containing ``(x, y)``; raises if none does."""
        v = self.vertices[self.triangles]
        p = np.array([x, y])
        a, b, c = v[:, 0], v[:, 1], v[:, 2]

        def cross(o, q):
            return (q[:, 0] - o[:, 0]) * (p[1] - o[:, 1]) - (q[:, 1] - o[:, 1]) * (p[0] - o[:, 0])

        scale = tol * self.diameters ** 2
        inside = (cross(a, b) >= -scale) & (cross(b, c) >= -scale) & (cross(c, a) >= -scale)
        hits = np.flatnonzero(inside)
        if hits.size == 0:
            raise MeshError(f"point ({x}, {y}) is outside the mesh")
        return int(hits[0])

    def __repr__(self):
        return (f"Mesh(vertices={self.n_vertices}, triangles={self.n_triangles}, "
                f"edges={self.n_edges}, h={self.h:.4g})")


def _signed_areas(v, tri):
    """Twice the signed area of each triangle."""
    a, b, c = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def uniform_triangulation(nx, domain=(0.0, 1.0, 0.0, 1.0), ny=None, diagonal="/"):
    """Structured mesh of a rectangle.

    Each of the ``nx * ny`` cells is split into two triangles by the same
    diagonal: ``"/"`` joins lower-left to upper-right, ``"\\"`` joins
    lower-right to upper-left.  Sides are tagged ``BOTTOM``, ``RIGHT``,
    ``TOP`` and ``LEFT``; ``mesh.h`` is the larger cell side (``1/nx`` on
    the unit square).
    """
    if int(nx) != nx or nx < 1:
        raise ValueError("nx must be a positive integer")
    nx = int(nx)
    ny = nx if ny is None else int(ny)
    if ny < 1:
        raise ValueError("ny must be a positive integer")
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0) or not np.all(np.isfinite([x0, x1, y0, y1])):
        raise InvalidDomainError(f"degenerate rectangle {domain!r}")
    if diagonal not in ("/", "\\"):
        raise ValueError("diagonal must be '/' or '\\'")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    if diagonal == "/":
        t1 = np.column_stack([v00, v10, v11])
        t2 = np.column_stack([v00, v11, v01])
    else:
        t1 = np.column_stack([v00, v10, v01])
        t2 = np.column_stack([v10, v11, v01])
    triangles = np.stack([t1, t2], axis=1).reshape(-1, 3)

    tags = {}
    for a in range(nx):
        tags[(a, a + 1)] = BOTTOM
        top = ny * (nx + 1) + a
        tags[(top, top + 1)] = TOP
    for b in range(ny):
        left = b * (nx + 1)
        tags[(left, left + nx + 1)] = LEFT
        tags[(left + nx, left + 2 * nx + 1)] = RIGHT

    h = max((x1 - x0) / nx, (y1 - y0) / ny)
    return Mesh(vertices, triangles, boundary_tags=tags, h=h)


# Gmsh element types: 1 = 2-node line, 2 = 3-node triangle, 15 = point
_GMSH_NODES = {1: 2, 2: 3, 3: 4, 4: 4, 5: 8, 6: 6, 7: 5, 8: 3, 9: 6, 10: 9,
               11: 10, 12: 27, 13: 18, 14: 14, 15: 1, 16: 8, 17: 20, 18: 15, 19: 13,
               20: 9, 21: 10, 22: 12, 23: 15, 24: 15, 25: 21, 26: 4, 27: 5, 28: 6}
_GMSH_NAMES = {3: "4-node quadrangle", 4: "4-node tetrahedron", 5: "8-node hexahedron",
               6: "6-node prism", 7: "5-node pyramid", 8: "3-node line", 9: "6-node triangle",
               10: "9-node quadrangle", 16: "8-node quadrangle", 20: "9-node triangle",
               21: "10-node triangle"}


def read_gmsh(path, h=None):
    """Read an ASCII MSH 2.2 file with 2-node boundary lines and 3-node triangles.

    Boundary edges take the physical tag of the matching line element.  The
    edge list is rebuilt from the triangles.  Returns a :class:`Mesh` whose
    ``physical_names`` attribute maps physical tags to their names, when the
    file provides them.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()

    pos = 0
    nlines = len(lines)

    def next_line():
        nonlocal pos
        while pos < nlines and not lines[pos].strip():
            pos += 1
        if pos >= nlines:
            raise GmshParseError("unexpected end of file", nlines)
        pos += 1
        return lines[pos - 1].strip(), pos

    def expect(tag):
        text, ln = next_line()
        if text != tag:
            raise GmshParseError(f"expected {tag}, found {text!r}", ln)

    version = None
    names = {}
    node_ids = node_xy = None
    lines_el = []
    tris = []

    while True:
        while pos < nlines and not lines[pos].strip():
            pos += 1
        if pos >= nlines:
            break
        header, ln = next_line()
        if header == "$MeshFormat":
            text, ln = next_line()
            parts = text.split()
            if len(parts) < 3:
                raise GmshParseError("malformed $MeshFormat", ln)
            version = parts[0]
            if version != "2.2":
                raise GmshParseError(f"unsupported MSH version {version} (only 2.2)", ln)
            if parts[1] != "0":
                raise GmshParseError("binary MSH files are not supported", ln)
            expect("$EndMeshFormat")
        elif header == "$PhysicalNames":
            text, ln = next_line()
            for _ in range(int(text)):
                text, ln = next_line()
                parts = text.split(maxsplit=2)
                names[int(parts[1])] = parts[2].strip('"')
            expect("$EndPhysicalNames")
        elif header == "$Nodes":
            if version is None:
                raise GmshParseError("$Nodes before $MeshFormat", ln)
            text, ln = next_line()
            count = int(text)
            node_ids = np.empty(count, dtype=np.int64)
            node_xy = np.empty((count, 2))
            node_lines = np.empty(count, dtype=np.int64)
            for i in range(count):
                text, ln = next_line()
                parts = text.split()
                if len(parts) < 4:
                    raise GmshParseError("malformed node record", ln)
                node_ids[i] = int(parts[0])
                node_xy[i] = float(parts[1]), float(parts[2])
                node_lines[i] = ln
                if abs(float(parts[3])) > 0:
                    raise GmshParseError("only planar meshes (z = 0) are supported", ln)
            expect("$EndNodes")
        elif header == "$Elements":
            text, ln = next_line()
            for _ in range(int(text)):
                text, ln = next_line()
                parts = [int(p) for p in text.split()]
                etype, ntags = parts[1], parts[2]
                tags = parts[3:3 + ntags]
                nodes = parts[3 + ntags:]
                if etype not in _GMSH_NODES:
                    raise GmshParseError(f"unknown element type {etype}", ln)
                if len(nodes) != _GMSH_NODES[etype]:
                    raise GmshParseError(f"element type {etype} expects {_GMSH_NODES[etype]} nodes", ln)
                if etype == 1:
                    lines_el.append((nodes[0], nodes[1], tags[0] if tags else UNTAGGED, ln))
                elif etype == 2:
                    tris.append(nodes + [ln])
                elif etype == 15:
                    continue
                else:
                    name = _GMSH_NAMES.get(etype, f"type {etype}")
                    raise GmshParseError(f"unsupported element {name} (type {etype})", ln)
            expect("$EndElements")
        elif header.startswith("$"):
            end = "$End" + header[1:]
            while True:
                text, ln = next_line()
                if text == end:
                    break
        else:
            raise GmshParseError(f"unexpected content {header!r}", ln)

    if version is None:
        raise GmshParseError("missing $MeshFormat section")
    if node_ids is None:
        raise GmshParseError("missing $Nodes section")
    if not tris:
        raise GmshParseError("no 3-node triangles found")

    index = {int(n): i for i, n in enumerate(node_ids)}

    def lookup(n, ln):
        try:
            return index[n]
        except KeyError:
            raise GmshParseError(f"element references undefined node {n}", ln) from None

    triangles = np.array([[lookup(n, t[3]) for n in t[:3]] for t in tris], dtype=np.int64)
    used = np.zeros(len(node_ids), dtype=bool)
    used[triangles.ravel()] = True
    if not used.all():
        first = int(np.flatnonzero(~used)[0])
        raise GmshParseError(f"node {node_ids[first]} is not referenced by any triangle",
                             int(node_lines[first]))

    tags = {}
    for a, b, tag, ln in lines_el:
        tags[(lookup(a, ln), lookup(b, ln))] = tag
    mesh = Mesh(node_xy, triangles, boundary_tags=tags, h=h)
    mesh.physical_names = dict(names)
    return mesh


def write_gmsh(mesh, path, physical_names=None, domain_tag=100):
    """Write ``mesh`` as ASCII MSH 2.2 (boundary lines carry the edge tags)."""
    bnd = mesh.boundary_edges
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        if physical_names:
            fh.write(f"$PhysicalNames\n{len(physical_names)}\n")
            for tag, (dim, name) in sorted(physical_names.items()):
                fh.write(f'{dim} {tag} "{name}"\n')
            fh.write("$EndPhysicalNames\n")
        fh.write(f"$Nodes\n{mesh.n_vertices}\n")
        for i, (x, y) in enumerate(mesh.vertices):
            fh.write(f"{i + 1} {x:.17g} {y:.17g} 0\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n{len(bnd) + mesh.n_triangles}\n")
        eid = 1
        for e in bnd:
            a, b = mesh.edges[e] + 1
            tag = int(mesh.edge_tags[e])
            if tag == UNTAGGED:
                fh.write(f"{eid} 1 0 {a} {b}\n")
            else:
                fh.write(f"{eid} 1 2 {tag} {tag} {a} {b}\n")
            eid += 1
        for a, b, c in mesh.triangles + 1:
            fh.write(f"{eid} 2 2 {domain_tag} {domain_tag} {a} {b} {c}\n")
            eid += 1
        fh.write("$EndElements\n")


def dump_csv(mesh, directory):
    """Write ``vertices.csv`` and ``triangles.csv`` into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "vertices.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(mesh.vertices):
            w.writerow([i, repr(float(x)), repr(float(y))])
    with open(os.path.join(directory, "triangles.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "v0", "v1", "v2", "area", "diameter"])
        for i, (tri, a, d) in enumerate(zip(mesh.triangles, mesh.areas, mesh.diameters)):
            w.writerow([i, *tri.tolist(), repr(float(a)), repr(float(d))])


@dataclass
class MeshQuality:
    min_angle: float
    max_angle: float
    diameter_ratio: float
    counter_clockwise: bool
    consistent_orientation: bool
    hanging_nodes: int

    @property
    def conforming(self):
        return self.counter_clockwise and self.consistent_orientation and self.hanging_nodes == 0


def triangle_angles(mesh):
    """Interior angles in degrees, shape ``(T, 3)``; column i is at vertex i."""
    v = mesh.vertices[mesh.triangles]
    angles = np.empty((mesh.n_triangles, 3))
    for i in range(3):
        a = v[:, (i + 1) % 3] - v[:, i]
        b = v[:, (i + 2) % 3] - v[:, i]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles[:, i] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return angles


def mesh_quality(mesh, tol=1e-10):
    """Shape-regularity proxies and conformity flags; nothing is enforced."""
    angles = triangle_angles(mesh)
    ccw = bool(np.all(mesh.signed_areas > 0))

    inner = mesh.interior_edges
    owners = mesh.edge_owners[inner]
    s0 = _local_sign(mesh, owners[:, 0], inner)
    s1 = _local_sign(mesh, owners[:, 1], inner)
    consistent = bool(np.all(s0 == -s1))

    # a hanging node sits strictly inside an edge that has a single owner
    bnd = mesh.boundary_edges
    bverts = np.unique(mesh.edges[bnd])
    hanging = 0
    if bnd.size:
        a = mesh.vertices[mesh.edges[bnd, 0]]
        d = mesh.vertices[mesh.edges[bnd, 1]] - a
        L2 = np.einsum("ij,ij->i", d, d)
        p = mesh.vertices[bverts]
        rel = p[None, :, :] - a[:, None, :]
        t = np.einsum("eij,ej->ei", rel, d) / L2[:, None]
        cross = rel[..., 0] * d[:, None, 1] - rel[..., 1] * d[:, None, 0]
        on_seg = (np.abs(cross) <= tol * L2[:, None]) & (t > tol) & (t < 1 - tol)
        hanging = int(np.unique(np.nonzero(on_seg)[1]).size)

    return MeshQuality(
        min_angle=float(angles.min()),
        max_angle=float(angles.max()),
        diameter_ratio=float(mesh.diameters.max() / mesh.diameters.min()),
        counter_clockwise=ccw,
        consistent_orientation=consistent,
        hanging_nodes=hanging,
    )


def _local_sign(mesh, tris, edges):
    local = mesh.tri_edges[tris] == edges[:, None]
    return mesh.tri_edge_signs[tris][local]
