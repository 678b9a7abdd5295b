"""Stats CSV and legacy-ASCII unstructured-grid field output.

The CSV column order is a public contract; run metadata rides in '#'-prefixed
header comments. Floats carry 17 significant digits so readers recover the
binary values exactly; undefined statistics become empty cells.
"""

import math

import numpy as np

from .statistics import STATS_COLUMNS


def format_float(x):
    return f"{x:.17g}"


def stats_row(record):
    cells = []
    for name, value in zip(STATS_COLUMNS, record.as_row()):
        if name == "picard_iters":
            cells.append(str(int(value)))
        elif isinstance(value, float) and math.isnan(value):
            cells.append("")
        else:
            cells.append(format_float(float(value)))
    return ",".join(cells)


class StatsWriter:
    """Streams one CSV row per time step."""

    def __init__(self, path, metadata):
        self.path = path
        self._fh = open(path, "w")
        for key, value in metadata.items():
            self._fh.write(f"# {key}: {value}\n")
        self._fh.write(",".join(STATS_COLUMNS) + "\n")

    def write(self, record):
        self._fh.write(stats_row(record) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_stats_csv(path, records, metadata):
    with StatsWriter(path, metadata) as writer:
        for record in records:
            writer.write(record)


def write_field_vtk(path, mesh, vel, pre, nut_nodal, k_nodal=None, title="urans2d fields"):
    """Legacy-ASCII VTK unstructured grid with vertex point data.

    Velocity vertex values come from the first vertex block of the quadratic
    coefficient vector; all floats are written with 17 significant digits so a
    reader recovers them bit-exactly.
    """
    nv = mesh.n_vertices
    n_scalar = (len(vel)) // 2
    vx, vy = vel[:nv], vel[n_scalar:n_scalar + nv]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        nt = mesh.n_triangles
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("\n".join(["5"] * nt) + "\n")
        fh.write(f"POINT_DATA {nv}\n")
        fh.write("VECTORS velocity double\n")
        for a, b in zip(vx, vy):
            fh.write(f"{a:.17g} {b:.17g} 0\n")
        _scalar_block(fh, "pressure", pre[:nv])
        _scalar_block(fh, "nu_t", nut_nodal)
        if k_nodal is not None:
            _scalar_block(fh, "tke", k_nodal)


def _scalar_block(fh, name, values):
    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    for v in np.asarray(values, dtype=float):
        fh.write(f"{v:.17g}\n")
