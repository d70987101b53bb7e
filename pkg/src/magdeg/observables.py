"""Derived quantities: mass loss, hydrogen volume, pH and line probes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import InvalidArgumentError
from .grid import LevelSetField, ScalarField, trilinear, volume_positive
from .transport import MaterialParams

GAS_CONSTANT = 8.314  # J/(mol K)
OH_MOLAR_MASS = 17.008  # g/mol
M3_TO_ML = 1e6
G_PER_MM3_TO_G_PER_L = 1e6

COLUMNS = ("time_h", "mass_lost_g", "hydrogen_ml", "avg_ph", "solid_volume_mm3")


@dataclass
class TimeSeries:
    """Recorded observables, one row per record."""

    time: List[float] = field(default_factory=list)
    mass_lost: List[float] = field(default_factory=list)
    hydrogen: List[float] = field(default_factory=list)
    avg_ph: List[float] = field(default_factory=list)
    solid_volume: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.time)

    def append(self, time, mass_lost, hydrogen, avg_ph, solid_volume):
        if self.time and not time > self.time[-1]:
            raise InvalidArgumentError(f"time must increase: {time} after {self.time[-1]}")
        self.time.append(float(time))
        self.mass_lost.append(float(mass_lost))
        self.hydrogen.append(float(hydrogen))
        self.avg_ph.append(float(avg_ph))
        self.solid_volume.append(float(solid_volume))

    def rows(self):
        return list(zip(self.time, self.mass_lost, self.hydrogen, self.avg_ph, self.solid_volume))

    def column(self, name) -> np.ndarray:
        attr = dict(zip(COLUMNS, ("time", "mass_lost", "hydrogen", "avg_ph", "solid_volume")))[name]
        return np.asarray(getattr(self, attr))

    @classmethod
    def from_rows(cls, rows):
        ts = cls()
        for r in rows:
            ts.append(*r)
        return ts


def mass_loss(phi_t: LevelSetField, phi_0: LevelSetField, params: MaterialParams) -> float:
    """Dissolved metal mass (g) between two level sets, positive for dissolution."""
    if phi_t.grid != phi_0.grid:
        raise InvalidArgumentError("level sets live on different grids")
    return params.mg_sol * (volume_positive(phi_0) - volume_positive(phi_t))


def hydrogen_volume(mass_lost: float, params: MaterialParams) -> float:
    """Hydrogen released (mL) by ``mass_lost`` grams of Mg, one mole of H2 per mole of Mg."""
    if mass_lost < 0:
        raise InvalidArgumentError("mass_lost must be non-negative")
    moles = mass_lost / params.mg_mol
    return moles * GAS_CONSTANT * params.T / params.P * M3_TO_ML


def oh_molar(c_oh):
    """OH- concentration in mol/L from g/mm^3."""
    return np.asarray(c_oh, dtype=float) * G_PER_MM3_TO_G_PER_L / OH_MOLAR_MASS


def oh_from_ph(ph: float) -> float:
    """Inverse of :func:`ph_value`: OH- in g/mm^3 for a given pH."""
    return 10.0 ** (ph - 14.0) * OH_MOLAR_MASS / G_PER_MM3_TO_G_PER_L


def ph_value(c_oh, floor: float = 0.0):
    """``14 + log10([OH-] in mol/L)`` with the concentration floored at ``floor`` g/mm^3."""
    c = np.maximum(np.asarray(c_oh, dtype=float), floor)
    if np.any(c <= 0):
        raise InvalidArgumentError("pH undefined for zero OH- concentration; pass a positive floor")
    out = 14.0 + np.log10(oh_molar(c))
    return float(out) if out.ndim == 0 else out


def ph_field(c_oh: ScalarField, floor: float = None) -> ScalarField:
    """Pointwise pH.  ``floor`` defaults to the smallest positive value present."""
    v = c_oh.values
    if floor is None:
        pos = v[v > 0]
        floor = float(pos.min()) if pos.size else 0.0
    return ScalarField(c_oh.grid, ph_value(v, floor), "dimensionless")


def avg_ph(c_oh: ScalarField, phi: LevelSetField, floor: float = 0.0) -> float:
    """pH of the mean OH- concentration over the medium (``phi < 0``)."""
    if c_oh.grid != phi.grid:
        raise InvalidArgumentError("c_oh and phi live on different grids")
    fluid = phi.values < 0
    if not fluid.any():
        raise InvalidArgumentError("no fluid region to average over")
    return ph_value(float(c_oh.values[fluid].mean()), floor)


def probe_line(field: ScalarField, p0, p1, n_samples: int):
    """Trilinear samples at ``n_samples`` equally spaced points from ``p0`` to ``p1``.

    Returns a list of ``(distance_from_p0, value)`` pairs.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if p0.shape != (3,) or p1.shape != (3,):
        raise InvalidArgumentError("endpoints need three coordinates")
    if n_samples < 2:
        raise InvalidArgumentError("need at least two samples")
    length = float(np.linalg.norm(p1 - p0))
    if length == 0:
        raise InvalidArgumentError("endpoints coincide")
    if not field.grid.contains(np.stack([p0, p1])).all():
        raise InvalidArgumentError("probe endpoints must lie inside the grid box")
    s = np.linspace(0.0, 1.0, n_samples)
    pts = p0 + s[:, None] * (p1 - p0)
    vals = trilinear(field.values, field.grid, field.grid.clamp(pts))
    return [(float(d), float(v)) for d, v in zip(s * length, vals)]
