"""Dissolving slab against the 1D similarity solution.

A thin box holds a solid half-space at x < s0.  With reactions and the
initial push switched off, the front recedes as ``s0 + 2 alpha sqrt(t)``.
The script prints the simulated and analytic fronts side by side.

    python3 demos/stefan_slab.py
"""

import numpy as np

from magdeg.config import SimConfig
from magdeg.grid import Cuboid
from magdeg.interface import StefanParams, stefan_alpha, stefan_front
from magdeg.simulation import run_simulation
from magdeg.transport import MaterialParams

h, length, D = 0.02, 5.0, 0.06273
s0 = 1.0 + h / 2
params = MaterialParams.nacl(D_mg=D, k1=0.0, k2=0.0, gamma=0.0)
config = SimConfig(extent=(length, 2 * h, 2 * h), spacing=h,
                   geometry=Cuboid((s0 - 50.0, 0.0, 0.0), (50.0, 100.0, 100.0)),
                   materials=params, c_mg0=0.0, c_cl0=0.0, dt=0.025, t_end=22.0, tol=1e-10)


def front(phi):
    v = phi.values[:, 1, 1]
    i = np.nonzero((v[:-1] >= 0) & (v[1:] < 0))[0][0]
    return phi.grid.origin[0] + h * (i + v[i] / (v[i] - v[i + 1]))


samples = {}
run_simulation(config, on_step=lambda i, t, state, phi: samples.update({round(t, 6): front(phi)}))

alpha = stefan_alpha(StefanParams(s0, D, params.mg_0, params.mg_sat, params.mg_sol))
print(f"alpha = {alpha:.6f} mm/sqrt(h)")
print(f"{'t (h)':>6} {'simulated':>10} {'analytic':>10}")
for t in (0.5, 1, 2, 5, 10, 15, 22):
    print(f"{t:6g} {samples[t]:10.5f} {stefan_front(s0, alpha, t):10.5f}")
