"""Time-stepping driver coupling the level set with the transport solver."""

from __future__ import annotations

import time as _time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import SimConfig
from .errors import InvariantViolation, NumericalFailureError, SolverFailureError
from .grid import LevelSetField, sdf_build, volume_positive
from .interface import (NoInterfaceWarning, advect_subcycled, has_interface,
                        normal_velocity, reinitialize, settle)
from .observables import TimeSeries, avg_ph, hydrogen_volume, mass_loss
from .transport import ChemState, initial_state, transport_step

PENALTY_TOL = 1e-6
# reinitialization is skipped while the band moved less than this fraction of h
REINIT_MIN_CHANGE = 1e-3


@dataclass
class Diagnostics:
    clipped: int = 0
    gradient_clamped: int = 0
    subcycles: list = field(default_factory=list)
    solver_reports: list = field(default_factory=list)
    volume_increases: list = field(default_factory=list)
    reinit_skipped: int = 0
    wall_time: float = 0.0

    @property
    def max_iterations(self) -> int:
        return max((r.iterations for step in self.solver_reports for r in step.values()), default=0)


@dataclass
class RunResult:
    series: TimeSeries
    final_state: ChemState
    final_phi: LevelSetField
    initial_phi: LevelSetField
    diagnostics: Diagnostics


def _record(series, t, state, phi, phi0, config):
    p = config.materials
    lost = mass_loss(phi, phi0, p)
    h2 = hydrogen_volume(max(lost, 0.0), p)
    series.append(t, lost, h2, avg_ph(state.c_oh, phi, config.c_oh0), volume_positive(phi))


def _check(step, state, phi, prev_volume, volume, config):
    h = phi.grid.h
    for name, arr in zip(("c_mg", "c_film", "c_cl", "c_oh"), state.arrays()):
        if np.any(arr < 0):
            raise InvariantViolation(f"{name} has negative values", step)
    solid = phi.values >= 0
    if solid.any():
        p = config.materials
        dev = np.max(np.abs(state.c_mg.values[solid] - p.mg_sat)) / p.mg_sat
        if dev > PENALTY_TOL:
            raise InvariantViolation(f"penalty deviation {dev:.3e} at solid nodes", step)
    growth = volume - prev_volume
    if growth > 0.1 * h ** 3:
        raise InvariantViolation(f"solid volume grew by {growth:.3e} mm^3", step)


def dissolution_clamp(fresh: LevelSetField, old: LevelSetField) -> LevelSetField:
    """Keep a reinitialized level set from exceeding the old one near the front.

    While every speed is non-negative the solid only shrinks, and the signed
    distance to a shrinking set can only decrease pointwise.  Reinitialization
    round-off must therefore not push ``phi`` up inside the band, or the solid
    volume would creep back.
    """
    band = np.abs(old.values) <= old.band_width
    return fresh.with_values(np.where(band, np.minimum(fresh.values, old.values), fresh.values))


def _barely_moved(phi: LevelSetField, settled: LevelSetField) -> bool:
    """True if ``phi`` is within ``REINIT_MIN_CHANGE * h`` of the last reinitialized field."""
    band = np.abs(settled.values) <= settled.band_width
    return np.max(np.abs(phi.values - settled.values)[band]) <= REINIT_MIN_CHANGE * phi.grid.h


def initial_fields(config: SimConfig):
    """Starting level set and chemistry.

    The exact signed distance is settled to the reinitialization fixed point
    first, so edge rounding on the grid is not booked as dissolved metal.
    """
    grid = config.grid()
    phi0 = sdf_build(config.geometry, grid)
    if has_interface(phi0):
        phi0 = settle(phi0)
    state = initial_state(grid, phi0, config.materials, config.c_mg0, config.c_cl0, config.c_oh0)
    return phi0, state


def run_simulation(config: SimConfig, check: bool = False,
                   on_step: Optional[Callable] = None,
                   on_snapshot: Optional[Callable] = None,
                   phi0: Optional[LevelSetField] = None,
                   state: Optional[ChemState] = None) -> RunResult:
    """Run the coupled model from ``t = 0`` to ``config.t_end``.

    Each step computes the front velocity, advects the level set (subcycled
    for CFL), reinitializes on the configured cadence and after the Stefan
    push, then advances the transport fields.  A scheduled reinitialization
    is skipped while the band has moved less than ``REINIT_MIN_CHANGE * h``
    since the last one.  ``on_step(step, t, state, phi)``
    is called after every step and ``on_snapshot`` on the snapshot cadence
    (and at ``t = 0``).  ``check`` asserts nonnegativity, penalty accuracy and
    volume monotonicity after every step.
    """
    started = _time.perf_counter()
    if phi0 is None or state is None:
        built_phi, built_state = initial_fields(config)
        phi0 = built_phi if phi0 is None else phi0
        state = built_state if state is None else state
    params = config.materials
    dt = config.dt
    phi = settled = phi0
    diag = Diagnostics()
    series = TimeSeries()
    _record(series, 0.0, state, phi, phi0, config)
    if on_snapshot and config.snapshot_every:
        on_snapshot(0, state, phi)
    volume = volume_positive(phi)

    n_steps = config.n_steps
    for step in range(n_steps):
        t = step * dt
        try:
            vel = normal_velocity(state.c_mg, phi, params, step, t, dt, c_film=state.c_film)
            diag.gradient_clamped += vel.clamped
            phi, nsub = advect_subcycled(phi, vel, dt)
            diag.subcycles.append(nsub)
            due = vel.pushed or (step + 1) % config.reinit_every == 0
            if due and not vel.pushed and _barely_moved(phi, settled):
                diag.reinit_skipped += 1
                due = False
            if due:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always", NoInterfaceWarning)
                    fresh = reinitialize(phi)
                if vel.values.values.min() >= 0:
                    fresh = dissolution_clamp(fresh, phi)
                phi = settled = fresh
                diag.reinit_skipped += sum(issubclass(w.category, NoInterfaceWarning) for w in caught)
            state, info = transport_step(state, phi, params, dt, config.tol, config.max_iter)
        except (SolverFailureError, NumericalFailureError) as exc:
            exc.step = step
            exc.diagnostics = diag
            raise
        diag.clipped += info.clipped
        diag.solver_reports.append(info.reports)

        prev_volume, volume = volume, volume_positive(phi)
        if volume > prev_volume:
            diag.volume_increases.append((step, volume - prev_volume))
        if check:
            _check(step, state, phi, prev_volume, volume, config)

        t_new = (step + 1) * dt
        if (step + 1) % config.record_every == 0 or step == n_steps - 1:
            _record(series, t_new, state, phi, phi0, config)
        if on_snapshot and config.snapshot_every and (step + 1) % config.snapshot_every == 0:
            on_snapshot(step + 1, state, phi)
        if on_step:
            on_step(step, t_new, state, phi)

    diag.wall_time = _time.perf_counter() - started
    return RunResult(series, state, phi, phi0, diag)
