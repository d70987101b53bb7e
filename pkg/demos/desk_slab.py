"""Desk-scale slab in SBF, coarsened for a quick look.

Runs the shipped SBF configuration on a 1 mm grid for six hours and prints
the hydrogen, mass-loss and pH history every hour.  Pass ``--full`` for the
shipped 0.5 mm / 22 h run (about 20 minutes on one core).

    python3 demos/desk_slab.py [--full]
"""

import sys
from pathlib import Path

from magdeg.config import load_config
from magdeg.grid import Cuboid
from magdeg.simulation import run_simulation

config = load_config(Path(__file__).resolve().parents[1] / "configs" / "sbf.toml")
if "--full" not in sys.argv:
    # on 1 mm nodes the faces sit half-way between nodes when centred at 20.5
    config = config.replace(spacing=1.0, t_end=6.0,
                            geometry=Cuboid((20.5, 20.5, 20.5), (5.0, 5.0, 1.0)))
config = config.replace(snapshot_every=0)

result = run_simulation(config, check=True)
series = result.series
print(f"{'t (h)':>6} {'mass lost (g)':>14} {'H2 (mL)':>9} {'pH':>7}")
for t, mass, h2, ph, *_ in series.rows():
    if abs(t - round(t)) < 1e-9:
        print(f"{t:6g} {mass:14.4e} {h2:9.4f} {ph:7.3f}")
d = result.diagnostics
print(f"{d.wall_time:.0f} s, max {d.max_iterations} PCG iterations, {d.clipped} clipped values")
