"""Planar triangle meshes: generators, ASCII I/O, boundary markers, wall distance.

Vertices are 2D points, triangles are counterclockwise vertex index triples,
and every topological boundary edge carries a marker ("Wall" or "Other").
The eccentric-annulus generator maps a structured concentric annulus through
the disk automorphism that carries the offset circle pair onto concentric
circles, so boundary nodes land on their circles to round-off.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GeometryError,
    InvalidParameterError,
    MeshFormatError,
    OrientationError,
    TopologyError,
)

WALL = "Wall"
OTHER = "Other"
_MARKERS = (WALL, OTHER)


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


class TriMesh:
    """Immutable 2D triangulation with unique edge ids and marked boundary.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Counterclockwise vertex triples; clockwise input raises OrientationError.
    boundary_markers : dict[(int, int), str]
        Marker per boundary edge, keyed by the sorted vertex pair. Every
        topological boundary edge must appear; interior edges must not.
    """

    def __init__(self, vertices, triangles, boundary_markers):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise InvalidParameterError("vertices must be an (nv, 2) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise InvalidParameterError("triangles must be an (nt, 3) array")

        areas = _signed_areas(self.vertices, self.triangles)
        bad = np.where(areas <= 0)[0]
        if bad.size:
            raise OrientationError(
                f"triangle {bad[0]} has non-positive signed area {areas[bad[0]]:.3e}")
        self.areas = areas
        self.total_area = float(areas.sum())

        # unique edges; tri_edges[t, k] is the edge id of local edge k: (0,1), (1,2), (2,0)
        t = self.triangles
        raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)
        raw_sorted = np.sort(raw, axis=1)
        self.edges, inverse, counts = np.unique(
            raw_sorted, axis=0, return_inverse=True, return_counts=True)
        nt = len(t)
        self.tri_edges = inverse.reshape(3, nt).T.copy()
        if counts.max() > 2:
            eid = int(np.argmax(counts))
            raise TopologyError(f"edge {tuple(self.edges[eid])} belongs to {counts[eid]} triangles")

        boundary_ids = np.where(counts == 1)[0]
        boundary_set = {tuple(self.edges[e]) for e in boundary_ids}
        markers = {}
        for key, marker in boundary_markers.items():
            pair = tuple(sorted(int(v) for v in key))
            if marker not in _MARKERS:
                raise TopologyError(f"unknown boundary marker {marker!r} on edge {pair}")
            if pair not in boundary_set:
                raise TopologyError(f"marked edge {pair} is not a boundary edge of the mesh")
            markers[pair] = marker
        missing = boundary_set - set(markers)
        if missing:
            raise TopologyError(f"boundary edge {sorted(missing)[0]} carries no marker")

        self.boundary_edge_ids = boundary_ids
        edge_key_to_id = {tuple(e): i for i, e in enumerate(map(tuple, self.edges))}
        self.boundary_marker_by_edge = {edge_key_to_id[k]: m for k, m in markers.items()}
        self.wall_edge_ids = np.array(
            sorted(e for e, m in self.boundary_marker_by_edge.items() if m == WALL),
            dtype=np.int64)

        self._check_wall_loops()
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    def _check_wall_loops(self):
        if len(self.wall_edge_ids) == 0:
            return
        degree = {}
        for e in self.wall_edge_ids:
            for v in self.edges[e]:
                degree[int(v)] = degree.get(int(v), 0) + 1
        odd = [v for v, d in degree.items() if d != 2]
        if odd:
            raise TopologyError(
                f"wall edges do not form closed polylines (vertex {odd[0]} has degree {degree[odd[0]]})")

    # -- convenience ---------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_midpoints(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def wall_vertex_ids(self):
        if len(self.wall_edge_ids) == 0:
            return np.array([], dtype=np.int64)
        return np.unique(self.edges[self.wall_edge_ids].ravel())

    def wall_segments(self):
        """(ns, 2, 2) array of wall edge endpoint coordinates."""
        return self.vertices[self.edges[self.wall_edge_ids]]

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])


# -- generators --------------------------------------------------------------

def gen_unit_square(n):
    """Uniform triangulation of [0,1]^2 with (n+1)^2 vertices and 2 n^2 triangles.

    All four sides are marked Wall.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameterError(f"subdivision count must be a positive integer, got {n!r}")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    tris = []
    for iy in range(n):
        for ix in range(n):
            ll, lr = vid(ix, iy), vid(ix + 1, iy)
            ul, ur = vid(ix, iy + 1), vid(ix + 1, iy + 1)
            tris.append((ll, lr, ur))
            tris.append((ll, ur, ul))
    markers = {}
    for i in range(n):
        markers[tuple(sorted((vid(i, 0), vid(i + 1, 0))))] = WALL
        markers[tuple(sorted((vid(i, n), vid(i + 1, n))))] = WALL
        markers[tuple(sorted((vid(0, i), vid(0, i + 1))))] = WALL
        markers[tuple(sorted((vid(n, i), vid(n, i + 1))))] = WALL
    return TriMesh(vertices, np.array(tris), markers)


def _disk_automorphism_params(r1, r2, c):
    """Parameters (a, theta, rho) of the unit-disk map separating the circle pair.

    After scaling by 1/r1 and rotating the inner center onto the positive real
    axis, w -> (w - a) / (1 - a w) carries the inner circle to |w| = rho and
    keeps the unit circle fixed. Returns a = 0 for the concentric case.
    """
    cx, cy = float(c[0]), float(c[1])
    dist = float(np.hypot(cx, cy))
    if not (0 < r2 < r1):
        raise GeometryError(f"need 0 < r2 < r1, got r1={r1}, r2={r2}")
    if dist + r2 >= r1:
        raise GeometryError(
            f"inner circle (|c|={dist:.6g}, r2={r2}) is not strictly inside the outer circle r1={r1}")
    theta = float(np.arctan2(cy, cx)) if dist > 0 else 0.0
    if dist / r1 < 1e-14:
        return 0.0, theta, r2 / r1
    p = (dist - r2) / r1
    q = (dist + r2) / r1
    s = p + q
    disc = (1 + p * q) ** 2 - s * s
    a = ((1 + p * q) - np.sqrt(disc)) / s
    rho = abs((p - a) / (1 - a * p))
    return float(a), theta, float(rho)


def gen_eccentric_annulus(n_r, n_t, r1=1.0, r2=0.1, c=(0.5, 0.0)):
    """Structured mesh of the region between an outer circle and an offset inner circle.

    A concentric annulus rho <= |w| <= 1 is meshed with n_r radial layers and
    n_t sectors, then pushed through the inverse disk automorphism so that the
    image boundary nodes lie exactly on the two physical circles. The n_t
    sector angles are chosen as the images of uniformly spaced physical angles
    on the outer circle, which keeps the outer boundary spacing uniform.
    Both circles are marked Wall.

    Parameters
    ----------
    n_r, n_t : int
        Radial layers (>= 1) and angular sectors (>= 3).
    r1, r2 : float
        Outer and inner radii.
    c : pair of float
        Inner circle center; must place the inner circle strictly inside.
    """
    if n_r < 1 or n_t < 3:
        raise InvalidParameterError(f"need n_r >= 1 and n_t >= 3, got n_r={n_r}, n_t={n_t}")
    a, theta, rho = _disk_automorphism_params(r1, r2, np.asarray(c, dtype=float))

    # physical outer angles -> angles in the concentric domain
    phys = np.exp(1j * (2 * np.pi * np.arange(n_t) / n_t - theta))
    beta = np.angle((phys - a) / (1 - a * phys))
    # radii equidistributed in physical space along the ray opposite the inner
    # circle, where the inverse map stretches the most
    x_near = (a - rho) / (1 - a * rho)
    x_line = x_near + (-1.0 - x_near) * np.arange(n_r + 1) / n_r
    radii = (a - x_line) / (1 - a * x_line)
    radii[0], radii[-1] = rho, 1.0

    w = radii[:, None] * np.exp(1j * beta[None, :])           # (n_r+1, n_t)
    z = r1 * np.exp(1j * theta) * (w + a) / (1 + a * w)
    vertices = np.column_stack([z.real.ravel(), z.imag.ravel()])

    def vid(j, i):
        return j * n_t + (i % n_t)

    tris = []
    for j in range(n_r):
        for i in range(n_t):
            # quad corners, counterclockwise in the plane (angle increases with i,
            # radius with j); split direction alternates for symmetry
            q00, q10 = vid(j, i), vid(j, i + 1)
            q01, q11 = vid(j + 1, i), vid(j + 1, i + 1)
            if (i + j) % 2 == 0:
                tris.append((q00, q11, q10))
                tris.append((q00, q01, q11))
            else:
                tris.append((q00, q01, q10))
                tris.append((q10, q01, q11))
    markers = {}
    for i in range(n_t):
        markers[tuple(sorted((vid(0, i), vid(0, i + 1))))] = WALL
        markers[tuple(sorted((vid(n_r, i), vid(n_r, i + 1))))] = WALL
    return TriMesh(vertices, np.array(tris), markers)


# -- ASCII I/O ----------------------------------------------------------------

def write_mesh(mesh, stream):
    """Write the documented ASCII format with 17 significant digits."""
    stream.write("trimesh 1\n")
    stream.write(f"V {mesh.n_vertices}\n")
    for x, y in mesh.vertices:
        stream.write(f"{x:.17g} {y:.17g}\n")
    stream.write(f"T {mesh.n_triangles}\n")
    for i, j, k in mesh.triangles:
        stream.write(f"{i} {j} {k}\n")
    items = sorted(mesh.boundary_marker_by_edge.items())
    stream.write(f"B {len(items)}\n")
    for eid, marker in items:
        i, j = mesh.edges[eid]
        stream.write(f"{i} {j} {marker}\n")


def read_mesh(stream):
    """Parse the ASCII mesh format and validate all mesh invariants."""
    lines = stream.read().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise MeshFormatError("unexpected end of file", line=len(lines))
        pos += 1
        return lines[pos - 1], pos

    header, ln = next_line()
    if header.split() != ["trimesh", "1"]:
        raise MeshFormatError(f"bad header {header!r}, expected 'trimesh 1'", line=ln)

    def block(tag):
        text, ln = next_line()
        parts = text.split()
        if len(parts) != 2 or parts[0] != tag:
            raise MeshFormatError(f"expected '{tag} <count>', got {text!r}", line=ln)
        try:
            return int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad count {parts[1]!r}", line=ln, column=len(tag) + 2)

    nv = block("V")
    vertices = np.empty((nv, 2))
    for i in range(nv):
        text, ln = next_line()
        parts = text.split()
        if len(parts) != 2:
            raise MeshFormatError(f"expected 'x y', got {text!r}", line=ln)
        try:
            vertices[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError(f"bad coordinate in {text!r}", line=ln)

    nt = block("T")
    triangles = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        text, ln = next_line()
        parts = text.split()
        if len(parts) != 3:
            raise MeshFormatError(f"expected 'i j k', got {text!r}", line=ln)
        try:
            triangles[i] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"bad vertex index in {text!r}", line=ln)
        if triangles[i].min() < 0 or triangles[i].max() >= nv:
            raise MeshFormatError(f"vertex index out of range in {text!r}", line=ln)

    nb = block("B")
    markers = {}
    for _ in range(nb):
        text, ln = next_line()
        parts = text.split()
        if len(parts) != 3:
            raise MeshFormatError(f"expected 'i j marker', got {text!r}", line=ln)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad edge index in {text!r}", line=ln)
        if parts[2] not in _MARKERS:
            raise MeshFormatError(f"unknown marker {parts[2]!r}", line=ln)
        markers[(i, j)] = parts[2]

    return TriMesh(vertices, triangles, markers)


# -- wall distance ------------------------------------------------------------

@dataclass
class WallDistanceField:
    """Exact Euclidean distance to the Wall polyline, tabulated at P2 nodes.

    vertex_values has one entry per mesh vertex, midpoint_values one per edge
    (the P2 midpoint dofs). at_points evaluates the same point-to-segment
    minimum at arbitrary locations, e.g. quadrature points.
    """

    segments: np.ndarray        # (ns, 2, 2)
    vertex_values: np.ndarray   # (nv,)
    midpoint_values: np.ndarray  # (ne,)

    def at_points(self, points):
        return _dist_to_segments(np.asarray(points, dtype=float), self.segments)

    def node_values(self):
        return np.concatenate([self.vertex_values, self.midpoint_values])


def _dist_to_segments(points, segments, chunk=4096):
    pts = points.reshape(-1, 2)
    a = segments[:, 0]
    ab = segments[:, 1] - a
    denom = np.einsum("sd,sd->s", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        p = pts[lo:lo + chunk]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("psd,sd->ps", ap, ab) / denom, 0.0, 1.0)
        diff = ap - t[:, :, None] * ab[None, :, :]
        out[lo:lo + chunk] = np.sqrt(np.einsum("psd,psd->ps", diff, diff).min(axis=1))
    return out.reshape(points.shape[:-1])


def wall_distance(mesh):
    """Distance from every P2 node to the nearest point of the Wall polyline."""
    from .errors import ConfigurationError

    segs = mesh.wall_segments()
    if len(segs) == 0:
        raise ConfigurationError("mesh has no Wall-marked edges; wall distance is undefined")
    field = WallDistanceField(
        segments=segs,
        vertex_values=_dist_to_segments(mesh.vertices, segs),
        midpoint_values=_dist_to_segments(mesh.edge_midpoints(), segs),
    )
    # nodes on wall edges are exactly at distance zero
    wall_vs = mesh.wall_vertex_ids()
    field.vertex_values[wall_vs] = 0.0
    field.midpoint_values[mesh.wall_edge_ids] = 0.0
    return field
