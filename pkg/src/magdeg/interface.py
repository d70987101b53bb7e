"""Corrosion-front tracking with a level set.

The solid is ``phi > 0``; the outward normal ``n = -grad(phi)/|grad(phi)|``
points from the metal into the medium.  The front recedes with speed
``V >= 0`` under ``d(phi)/dt + V |grad(phi)| = 0``, where ``V`` comes either
from the Stefan push (first step) or from the Rankine-Hugoniot balance
``V = D_eff * dC/dn / (mg_sol - mg_sat)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcx

from .errors import InvalidArgumentError, RootNotFoundError
from .grid import LevelSetField, ScalarField, trilinear
from .transport import MaterialParams, effective_diffusivity

CFL_LIMIT = 0.9
# relative disagreement between central and one-sided gradients that marks a kink
KINK_TOL = 0.2


class NoInterfaceWarning(UserWarning):
    """The level set has a single sign, so there is no front to work with."""


# ---------------------------------------------------------------------------
# 1D Stefan solution


@dataclass(frozen=True)
class StefanParams:
    s0: float
    D: float
    mg_0: float
    mg_sat: float
    mg_sol: float

    def __post_init__(self):
        if not self.D > 0:
            raise InvalidArgumentError("D must be positive")
        if not (self.mg_0 <= self.mg_sat < self.mg_sol):
            raise InvalidArgumentError("need mg_0 <= mg_sat < mg_sol")

    @classmethod
    def from_material(cls, params: MaterialParams, s0: float = 0.0, D=None):
        return cls(s0, params.D_mg if D is None else D, params.mg_0, params.mg_sat, params.mg_sol)

    @property
    def ratio(self) -> float:
        return (self.mg_0 - self.mg_sat) / (self.mg_sol - self.mg_sat)


STEFAN_FORMS = ("flux", "printed")


def _stefan_residual(x, ratio, form):
    # x = alpha / sqrt(D); exp(-x^2)/erfc(s*x) == 1/erfcx(s*x)
    sign = 1.0 if form == "flux" else -1.0
    return x - ratio / math.sqrt(math.pi) / erfcx(sign * x)


def stefan_alpha(p: StefanParams, form: str = "flux", tol: float = 1e-12) -> float:
    """Front coefficient ``alpha`` (mm/sqrt(h)) of ``s(t) = s0 + 2 alpha sqrt(t)``.

    ``alpha`` solves ``alpha = R sqrt(D/pi) exp(-alpha^2/D) / erfc(+-alpha/sqrt(D))``
    with ``R = (mg_0 - mg_sat)/(mg_sol - mg_sat)``.  ``form="flux"`` uses
    ``erfc(+alpha/sqrt(D))``, the exact similarity solution for a solid at
    ``x < s`` dissolving into a half-space, which is what the coupled solver
    reproduces.  ``form="printed"`` uses ``erfc(-alpha/sqrt(D))``.  Both roots
    are negative for ``mg_0 < mg_sat`` (the solid recedes) and are found on
    ``[-sqrt(D), 0]`` with Brent's method.
    """
    if form not in STEFAN_FORMS:
        raise InvalidArgumentError(f"form must be one of {STEFAN_FORMS}")
    ratio = p.ratio
    if ratio == 0.0:
        return 0.0
    sqd = math.sqrt(p.D)
    lo, hi = -1.0, 0.0
    f_lo = _stefan_residual(lo, ratio, form)
    f_hi = _stefan_residual(hi, ratio, form)
    if f_lo * f_hi > 0:
        raise RootNotFoundError(f"no sign change on [-sqrt(D), 0] for ratio {ratio:.6g}")
    return brentq(_stefan_residual, lo, hi, args=(ratio, form), xtol=tol, rtol=4 * np.finfo(float).eps) * sqd


def stefan_front(s0: float, alpha: float, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be non-negative")
    out = s0 + 2.0 * alpha * np.sqrt(t)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# normals, offset gradient and velocity


def unit_normals(phi: np.ndarray, h: float):
    """Outward normals ``-grad(phi)/|grad(phi)|`` and ``|grad(phi)|`` (central differences)."""
    g = np.stack(np.gradient(phi, h), axis=-1)
    mag = np.linalg.norm(g, axis=-1)
    safe = np.where(mag > 0, mag, 1.0)
    n = -g / safe[..., None]
    return n, mag


def _sample_clamped(values, grid, pts):
    inside = grid.contains(pts.reshape(-1, 3)).reshape(pts.shape[:-1])
    pts = grid.clamp(pts)
    return trilinear(values, grid, pts), int(np.count_nonzero(~inside))


@dataclass
class _Offsets:
    mask: np.ndarray
    normals: np.ndarray
    base: np.ndarray


def _offset_points(phi: LevelSetField, width: float, project: bool) -> _Offsets:
    grid = phi.grid
    v = phi.values
    mask = np.abs(v) <= width
    n, _ = unit_normals(v, grid.h)
    n = n[mask]
    x, y, z = grid.coordinates()
    pos = np.stack([x[mask], y[mask], z[mask]], axis=-1)
    if project:
        # closest point on the zero level set for a signed distance
        pos = pos + v[mask][:, None] * n
    return _Offsets(mask, n, pos)


def interface_gradient(c_mg: ScalarField, phi: LevelSetField, h=None, project: bool = True,
                       diagnostics: dict = None) -> ScalarField:
    """Offset one-sided normal derivative ``(C(x + h n) - C(x + 2h n)) / h``.

    Evaluated at band nodes (``|phi| <= band_width``), zero elsewhere.  With
    ``project=True`` the base point ``x`` is the node's closest point on the
    front, so every band node reports the front value along its normal line;
    ``project=False`` uses the node itself.  Offset points leaving the box are
    clamped back in and counted in ``diagnostics["clamped"]``.
    """
    grid = phi.grid
    if c_mg.grid != grid:
        raise InvalidArgumentError("c_mg and phi live on different grids")
    h = grid.h if h is None else float(h)
    off = _offset_points(phi, phi.band_width, project)
    c1, k1 = _sample_clamped(c_mg.values, grid, off.base + h * off.normals)
    c2, k2 = _sample_clamped(c_mg.values, grid, off.base + 2 * h * off.normals)
    out = np.zeros(grid.dims)
    out[off.mask] = (c1 - c2) / h
    if diagnostics is not None:
        diagnostics["clamped"] = diagnostics.get("clamped", 0) + k1 + k2
    return ScalarField(grid, out, "dimensionless")


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Normal recession speed (mm/h) on the grid; zero outside the extension band."""

    values: ScalarField
    pushed: bool = False
    clamped: int = 0

    def __post_init__(self):
        if self.values.unit != "mm/h":
            raise InvalidArgumentError("velocity must be in mm/h")

    @property
    def grid(self):
        return self.values.grid

    def max_speed(self) -> float:
        return float(np.max(np.abs(self.values.values)))

    @classmethod
    def zeros(cls, grid):
        return cls(ScalarField.constant(grid, 0.0, "mm/h"))


def extension_width(phi: LevelSetField) -> float:
    return 2.0 * phi.band_width


def stefan_push_speed(params: MaterialParams, dt: float, form: str = "flux") -> float:
    """First-step speed ``gamma * 2|alpha| / sqrt(dt)``."""
    alpha = stefan_alpha(StefanParams.from_material(params), form)
    return params.gamma * 2.0 * abs(alpha) / math.sqrt(dt)


def normal_velocity(c_mg: ScalarField, phi: LevelSetField, params: MaterialParams,
                    step_index: int, t: float, dt: float, c_film: ScalarField = None,
                    stefan_form: str = "flux") -> VelocityField:
    """Recession speed of the front, extended constant along normals.

    Step 0 with ``gamma > 0`` gives the Stefan push evaluated at ``t + dt``
    (the end of the first step, avoiding the ``1/sqrt(t)`` singularity).
    Otherwise each node within ``2 * band_width`` of the front takes the
    Rankine-Hugoniot speed at its closest front point, with the effective
    diffusivity read from the film at the first offset point.
    """
    grid = phi.grid
    if c_mg.grid != grid:
        raise InvalidArgumentError("c_mg and phi live on different grids")
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    width = extension_width(phi)
    out = np.zeros(grid.dims)
    if step_index == 0 and params.gamma > 0:
        alpha = stefan_alpha(StefanParams.from_material(params), stefan_form)
        speed = params.gamma * 2.0 * abs(alpha) / math.sqrt(t + dt)
        out[np.abs(phi.values) <= width] = speed
        return VelocityField(ScalarField(grid, out, "mm/h"), pushed=True)

    h = grid.h
    off = _offset_points(phi, width, project=True)
    p1 = off.base + h * off.normals
    c1, k1 = _sample_clamped(c_mg.values, grid, p1)
    c2, k2 = _sample_clamped(c_mg.values, grid, off.base + 2 * h * off.normals)
    grad = (c1 - c2) / h
    if c_film is None:
        d_eff = params.D_mg
    else:
        film, _ = _sample_clamped(c_film.values, grid, p1)
        d_eff = effective_diffusivity(params.D_mg, film, params)
    out[off.mask] = d_eff * grad / (params.mg_sol - params.mg_sat)
    return VelocityField(ScalarField(grid, out, "mm/h"), clamped=k1 + k2)


# ---------------------------------------------------------------------------
# advection


def _minmod(a, b):
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _one_sided(phi, h, axis):
    """Second-order ENO backward and forward differences along ``axis``."""
    pad = [(0, 0)] * 3
    pad[axis] = (2, 2)
    p = np.pad(phi, pad, mode="reflect", reflect_type="odd")
    n = phi.shape[axis]

    def sl(start):
        return np.take(p, np.arange(start, start + n), axis=axis)

    pm2, pm1, p0, pp1, pp2 = sl(0), sl(1), sl(2), sl(3), sl(4)
    d2m = (p0 - 2 * pm1 + pm2) / h ** 2
    d20 = (pp1 - 2 * p0 + pm1) / h ** 2
    d2p = (pp2 - 2 * pp1 + p0) / h ** 2
    dm = (p0 - pm1) / h + 0.5 * h * _minmod(d2m, d20)
    dp = (pp1 - p0) / h - 0.5 * h * _minmod(d20, d2p)
    return dm, dp


def godunov_gradient_norm(phi: np.ndarray, h: float, speed: np.ndarray) -> np.ndarray:
    """Upwind ``|grad(phi)|`` for ``d(phi)/dt + speed*|grad(phi)| = 0``."""
    pos = np.zeros(phi.shape)
    neg = np.zeros(phi.shape)
    for axis in range(3):
        dm, dp = _one_sided(phi, h, axis)
        pos += np.maximum(np.maximum(dm, 0.0) ** 2, np.minimum(dp, 0.0) ** 2)
        neg += np.maximum(np.minimum(dm, 0.0) ** 2, np.maximum(dp, 0.0) ** 2)
    return np.where(speed > 0, np.sqrt(pos), np.sqrt(neg))


def cfl_substeps(vel: VelocityField, dt: float, h: float) -> int:
    vmax = vel.max_speed()
    return max(1, math.ceil(vmax * dt / (CFL_LIMIT * h) - 1e-12))


def advect(phi: LevelSetField, vel: VelocityField, dt: float) -> LevelSetField:
    """One explicit upwind step of ``d(phi)/dt + V |grad(phi)| = 0``."""
    grid = phi.grid
    if vel.grid != grid:
        raise InvalidArgumentError("velocity and level set live on different grids")
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    v = vel.values.values
    if vel.max_speed() * dt > CFL_LIMIT * grid.h * (1 + 1e-12):
        raise InvalidArgumentError(
            f"CFL violated: max|V| dt = {vel.max_speed() * dt:.3e} > {CFL_LIMIT} h")
    if not np.any(v):
        return phi
    norm = godunov_gradient_norm(phi.values, grid.h, v)
    return phi.with_values(phi.values - dt * v * norm)


def advect_subcycled(phi: LevelSetField, vel: VelocityField, dt: float):
    """Advance by ``dt`` in as many equal CFL-safe substeps as needed."""
    n = cfl_substeps(vel, dt, phi.grid.h)
    for _ in range(n):
        phi = advect(phi, vel, dt / n)
    return phi, n


# ---------------------------------------------------------------------------
# reinitialization


@numba.njit(cache=True)
def _sweep(d, fixed, h):
    nx, ny, nz = d.shape
    inf = np.inf
    changed = 0.0
    for order in range(8):
        sx = 1 if order & 1 == 0 else -1
        sy = 1 if order & 2 == 0 else -1
        sz = 1 if order & 4 == 0 else -1
        for ii in range(nx):
            i = ii if sx > 0 else nx - 1 - ii
            for jj in range(ny):
                j = jj if sy > 0 else ny - 1 - jj
                for kk in range(nz):
                    k = kk if sz > 0 else nz - 1 - kk
                    if fixed[i, j, k]:
                        continue
                    a = inf
                    if i > 0:
                        a = d[i - 1, j, k]
                    if i < nx - 1 and d[i + 1, j, k] < a:
                        a = d[i + 1, j, k]
                    b = inf
                    if j > 0:
                        b = d[i, j - 1, k]
                    if j < ny - 1 and d[i, j + 1, k] < b:
                        b = d[i, j + 1, k]
                    c = inf
                    if k > 0:
                        c = d[i, j, k - 1]
                    if k < nz - 1 and d[i, j, k + 1] < c:
                        c = d[i, j, k + 1]
                    # sort a <= b <= c
                    if a > b:
                        a, b = b, a
                    if b > c:
                        b, c = c, b
                    if a > b:
                        a, b = b, a
                    if a == inf:
                        continue
                    u = a + h
                    if u > b:
                        u = 0.5 * (a + b + math.sqrt(2.0 * h * h - (a - b) ** 2))
                        if u > c:
                            s = a + b + c
                            q = s * s - 3.0 * (a * a + b * b + c * c - h * h)
                            u = (s + math.sqrt(max(q, 0.0))) / 3.0
                    if u < d[i, j, k]:
                        delta = d[i, j, k] - u
                        if delta > changed:
                            changed = delta
                        d[i, j, k] = u
    return changed


def interface_nodes(phi: np.ndarray) -> np.ndarray:
    """Nodes with a sign change (``phi >= 0`` vs ``phi < 0``) to a face neighbour."""
    s = phi >= 0
    seed = np.zeros(phi.shape, dtype=bool)
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        flip = s[tuple(lo)] != s[tuple(hi)]
        seed[tuple(lo)] |= flip
        seed[tuple(hi)] |= flip
    return seed


def has_interface(phi: LevelSetField) -> bool:
    v = phi.values
    return bool(np.any(v >= 0) and np.any(v < 0))


def _crossing_gradient_norm(v, h):
    """|grad(phi)| using, per axis, the one-sided difference across a sign change.

    Where both neighbours change sign the steeper side wins; with no sign
    change the central difference is used.
    """
    total = np.zeros(v.shape)
    for a in range(3):
        pad = [(1, 1) if i == a else (0, 0) for i in range(3)]
        p = np.pad(v, pad, mode="edge")
        n = v.shape[a]
        left = np.take(p, np.arange(n), axis=a)
        right = np.take(p, np.arange(2, n + 2), axis=a)
        dm = np.abs(v - left) / h
        dp = np.abs(right - v) / h
        cm = np.sign(left) != np.sign(v)
        cp = np.sign(right) != np.sign(v)
        g = np.where(cm & cp, np.maximum(dm, dp),
                     np.where(cm, dm, np.where(cp, dp, np.abs(right - left) / (2 * h))))
        total += g * g
    return np.sqrt(total)


def reinitialize(phi: LevelSetField, skip_tol: float = 1e-2, max_rounds: int = 20,
                 seed_tol: float = 0.15) -> LevelSetField:
    """Restore the signed-distance property by fast sweeping.

    If ``| |grad(phi)| - 1 | <= skip_tol`` at every band node the field is
    already a distance function there and is returned untouched.  Otherwise
    nodes next to a sign change seed the sweep with ``|phi| / |grad(phi)|``.
    Near kinks of the zero level (edges, corners) the central gradient is
    unreliable, which shows up as disagreement with the one-sided difference
    across the interface; such seeds keep ``|phi|`` unless the gradient norm
    is off by more than 0.5.  Elsewhere seeds within ``seed_tol`` of a unit
    gradient are left alone.  All other nodes receive the first-order Godunov
    distance to the seeds.  A field with no sign change is returned as is with
    a :class:`NoInterfaceWarning`.
    """
    if not has_interface(phi):
        warnings.warn("level set has no interface; reinitialization skipped", NoInterfaceWarning)
        return phi
    v = phi.values
    h = phi.grid.h
    _, mag = unit_normals(v, h)
    band = np.abs(v) <= phi.band_width
    if np.max(np.abs(mag[band] - 1.0)) <= skip_tol:
        return phi
    seed = interface_nodes(v)
    seed_val = np.abs(v[seed])
    m = mag[seed]
    smooth = np.abs(_crossing_gradient_norm(v, h)[seed] - m) <= KINK_TOL * m
    rescale = (np.abs(m - 1.0) > np.where(smooth, seed_tol, 0.5)) & (m > 0)
    seed_val = np.where(rescale, seed_val / np.where(m > 0, m, 1.0), seed_val)
    d = np.full(v.shape, np.inf)
    d[seed] = seed_val
    for _ in range(max_rounds):
        if _sweep(d, seed, h) <= 1e-14 * h:
            break
    out = np.where(v >= 0, d, -d)
    return phi.with_values(out)


def settle(phi: LevelSetField, max_passes: int = 5) -> LevelSetField:
    """Reinitialize until the field stops changing.

    A sharp-edged distance function is not exactly representable by the
    first-order sweep, so the first pass rounds edges and corners.  Iterating
    to the fixed point gives a starting field that later reinitializations
    leave alone.
    """
    for _ in range(max_passes):
        nxt = reinitialize(phi)
        if np.array_equal(nxt.values, phi.values):
            break
        phi = nxt
    return phi
