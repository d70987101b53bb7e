"""File output: CSV time series, legacy VTK snapshots and calibration tables."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .grid import LevelSetField, ScalarField, StructuredGrid
from .observables import COLUMNS, TimeSeries, ph_field
from .transport import ChemState

VTK_ARRAYS = ("c_mg", "c_film", "c_cl", "c_oh", "phi", "ph")


def export_csv(series: TimeSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in series.rows():
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> TimeSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise InvalidArgumentError(f"unexpected header {header}")
        return TimeSeries.from_rows([[float(v) for v in row] for row in reader if row])


def read_reference_csv(path):
    """Two-column ``time_h, hydrogen_mL`` curve; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise InvalidArgumentError(f"{path}: bad row {i + 1}: {row}") from None
    if not rows:
        raise InvalidArgumentError(f"{path}: no data rows")
    return rows


def write_reference_csv(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("time_h", "hydrogen_ml"))
        for t, v in curve:
            w.writerow((repr(float(t)), repr(float(v))))


def write_trace_csv(trace, names, path) -> None:
    """One row per objective evaluation: ``k2, <params>, objective, failed, best_so_far``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("eval", "k2", *names, "objective", "failed", "best_so_far"))
        for i, e in enumerate(trace):
            w.writerow((i, repr(e.k2), *(repr(float(v)) for v in e.params), repr(e.y),
                        int(e.failed), repr(e.best)))


def export_vtk(state: ChemState, phi: LevelSetField, path, binary: bool = True,
               oh_floor: float = None, title: str = "magdeg snapshot") -> None:
    """Legacy VTK STRUCTURED_POINTS file with the six node arrays."""
    grid = state.grid
    if phi.grid != grid:
        raise InvalidArgumentError("state and level set live on different grids")
    arrays = dict(zip(("c_mg", "c_film", "c_cl", "c_oh"), state.arrays()))
    arrays["phi"] = phi.values
    arrays["ph"] = ph_field(state.c_oh, oh_floor).values
    nx, ny, nz = grid.dims
    head = [
        "# vtk DataFile Version 3.0",
        f"{title} t={state.time:.6g}",
        "BINARY" if binary else "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} {nz}",
        "ORIGIN {} {} {}".format(*grid.origin),
        f"SPACING {grid.h} {grid.h} {grid.h}",
        f"POINT_DATA {grid.size}",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(head) + "\n").encode("ascii"))
        for name in VTK_ARRAYS:
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n".encode("ascii"))
            # VTK point order runs x fastest
            flat = np.asarray(arrays[name], dtype=float).ravel(order="F")
            if binary:
                fh.write(flat.astype(">f8").tobytes())
                fh.write(b"\n")
            else:
                for chunk in range(0, flat.size, 6):
                    fh.write((" ".join(repr(float(v)) for v in flat[chunk:chunk + 6]) + "\n").encode("ascii"))


def read_vtk(path):
    """Read a file written by :func:`export_vtk`; returns ``(grid, {name: array})``."""
    data = Path(path).read_bytes()
    pos = 0

    def line():
        nonlocal pos
        end = data.index(b"\n", pos)
        out = data[pos:end].decode("ascii").strip()
        pos = end + 1
        return out

    line()
    line()
    mode = line()
    if line() != "DATASET STRUCTURED_POINTS":
        raise InvalidArgumentError("not a STRUCTURED_POINTS dataset")
    dims = tuple(int(v) for v in line().split()[1:])
    origin = tuple(float(v) for v in line().split()[1:])
    spacing = [float(v) for v in line().split()[1:]]
    n = int(line().split()[1])
    grid = StructuredGrid(dims, spacing[0], origin)
    arrays = {}
    while pos < len(data):
        header = line()
        if not header:
            continue
        name = header.split()[1]
        line()  # LOOKUP_TABLE
        if mode == "BINARY":
            flat = np.frombuffer(data[pos:pos + 8 * n], dtype=">f8").astype(float)
            pos += 8 * n
        else:
            vals = []
            while len(vals) < n:
                vals.extend(float(v) for v in line().split())
            flat = np.asarray(vals)
        arrays[name] = flat.reshape(dims, order="F")
    return grid, arrays


def load_snapshot(path):
    """Rebuild ``(ChemState, LevelSetField)`` from a snapshot file."""
    grid, arr = read_vtk(path)
    state = ChemState(*(ScalarField(grid, arr[k]) for k in ("c_mg", "c_film", "c_cl", "c_oh")))
    return state, LevelSetField.from_array(grid, arr["phi"])
