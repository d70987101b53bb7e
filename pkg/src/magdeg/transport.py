"""Reaction-diffusion transport of Mg2+, Mg(OH)2 film, Cl- and OH-.

One call to :func:`step_transport` advances all four concentration fields by
one backward-Euler step on the structured grid:

* the film/Mg2+ exchange is integrated pointwise on fluid nodes, implicitly in
  the (Mg2+, film) pair with chloride and the film-saturation factor lagged;
  the same rate ``r`` is added to the film and removed from Mg2+, so the two
  contributions cancel exactly;
* Mg2+, Cl- and OH- each get one symmetric linear solve with a 7-point
  stencil and harmonic-mean face diffusivities;
* solid nodes (``phi >= 0``) pin Mg2+ to its saturation value with a penalty
  term, and faces touching ``phi > 0`` nodes carry no Cl-/OH- flux.

Units throughout are g/mm^3, mm, hours.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import InvalidArgumentError, NumericalFailureError, SolverFailureError
from .grid import LevelSetField, ScalarField, StructuredGrid

PENALTY_FACTOR = 1e8


@dataclass(frozen=True)
class MaterialParams:
    """Physical and model constants.

    Diffusivities in mm^2/h, ``k1`` in 1/h, ``k2`` in mm^6/(g^2 h),
    concentrations and densities in g/mm^3, ``T`` in K and ``P`` in Pa.
    Defaults are the literature constants shared by both electrolytes.
    """

    D_mg: float = 0.06273
    D_cl: float = 0.05
    D_oh: float = 25.2
    k1: float = 7.0
    k2: float = 1e20
    beta: float = 0.2
    gamma: float = 0.0
    epsilon: float = 0.55
    tau: float = 1.0
    mg_sat: float = 134e-6
    mg_sol: float = 1735e-6
    rho_film: float = 2344e-6
    mg_0: float = 0.0
    mg_mol: float = 24.305
    T: float = 295.15
    P: float = 101325.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("D_mg", "D_cl", "D_oh", "mg_sat", "mg_sol", "rho_film", "mg_mol", "T", "P"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {v}")
        for name in ("k1", "k2", "beta", "mg_0"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"{name} must be non-negative, got {v}")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidArgumentError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.tau >= 1.0:
            raise InvalidArgumentError(f"tau must be >= 1, got {self.tau}")
        if not self.mg_sat < self.mg_sol:
            raise InvalidArgumentError("mg_sat must be below mg_sol")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidArgumentError(f"gamma must lie in [0, 1], got {self.gamma}")

    @classmethod
    def sbf(cls, **overrides):
        """Calibrated low-diffusion (SBF) parameter set."""
        base = dict(D_mg=0.000338, D_cl=0.05, D_oh=25.2, k1=7.0, k2=1e15, beta=0.125, gamma=0.65)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def nacl(cls, **overrides):
        """Calibrated high-diffusion (NaCl) parameter set."""
        base = dict(D_mg=0.06273, D_cl=0.05, D_oh=25.2, k1=7.0, k2=1e20, beta=0.2, gamma=0.0)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "MaterialParams":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ChemState:
    c_mg: ScalarField
    c_film: ScalarField
    c_cl: ScalarField
    c_oh: ScalarField
    time: float = 0.0

    def __post_init__(self):
        g = self.c_mg.grid
        for name in ("c_film", "c_cl", "c_oh"):
            if getattr(self, name).grid != g:
                raise InvalidArgumentError(f"{name} lives on a different grid")

    @property
    def grid(self) -> StructuredGrid:
        return self.c_mg.grid

    @classmethod
    def from_arrays(cls, grid, c_mg, c_film, c_cl, c_oh, time=0.0):
        return cls(ScalarField(grid, c_mg), ScalarField(grid, c_film),
                   ScalarField(grid, c_cl), ScalarField(grid, c_oh), float(time))

    def arrays(self):
        return self.c_mg.values, self.c_film.values, self.c_cl.values, self.c_oh.values


def initial_state(grid, phi: LevelSetField, params: MaterialParams,
                  c_mg0: float, c_cl0: float, c_oh0: float) -> ChemState:
    """Uniform medium, Mg2+ at saturation and no chloride inside the solid."""
    solid = phi.values >= 0
    c_mg = np.where(solid, params.mg_sat, c_mg0)
    c_cl = np.where(solid, 0.0, c_cl0)
    c_oh = np.full(grid.dims, float(c_oh0))
    return ChemState.from_arrays(grid, c_mg, np.zeros(grid.dims), c_cl, c_oh)


def film_capacity(params: MaterialParams) -> float:
    """Maximum film concentration from the film density and porosity."""
    return params.rho_film * (1.0 - params.epsilon)


def effective_diffusivity(D, c_film, params: MaterialParams):
    """Interpolate between ``D`` and ``D*eps/tau`` by local film saturation.

    The saturation weight ``beta*c/c_max`` is capped at 1, which only matters
    for ``beta > 1``; below that the plain interpolation is returned.
    """
    cmax = film_capacity(params)
    frac = np.clip(np.asarray(c_film, dtype=float) / cmax, 0.0, 1.0)
    w = np.minimum(params.beta * frac, 1.0)
    out = D * ((1.0 - w) + w * (params.epsilon / params.tau))
    return float(out) if np.ndim(out) == 0 else out


def reaction_rates(c_mg, c_film, c_cl, params: MaterialParams):
    """Pointwise reaction terms ``(r_mg, r_film, r_oh)`` in g/mm^3/h."""
    c_mg = np.asarray(c_mg, dtype=float)
    c_film = np.asarray(c_film, dtype=float)
    c_cl = np.asarray(c_cl, dtype=float)
    cmax = film_capacity(params)
    formation = params.k1 * c_mg * (1.0 - params.beta * c_film / cmax)
    dissolution = params.k2 * c_film * c_cl ** 2
    r_film = formation - dissolution
    r_mg = -r_film
    r_oh = dissolution
    if r_film.ndim == 0:
        return float(r_mg), float(r_film), float(r_oh)
    return r_mg, r_film, r_oh


def react(c_mg, c_film, c_cl, params: MaterialParams, dt: float, active=None):
    """Advance the Mg2+/film exchange by one implicit step.

    Returns ``(c_mg_new, c_film_new, r, r_oh)`` where ``r`` is the net film
    formation rate actually applied (Mg2+ receives ``-r``) and ``r_oh`` the
    hydroxide source ``k2 * film_new * Cl^2``.  Nodes outside ``active`` are
    left untouched with zero rates.
    """
    C = np.asarray(c_mg, dtype=float)
    F = np.asarray(c_film, dtype=float)
    Cl = np.asarray(c_cl, dtype=float)
    cmax = film_capacity(params)
    s = 1.0 - params.beta * F / cmax
    q = params.k2 * Cl * Cl
    a = dt * params.k1 * np.maximum(s, 0.0)
    b = dt * q
    det = 1.0 + a + b
    F_lin = (F * (1.0 + a) + a * C) / det
    r = (F_lin - F) / dt
    # film -> Mg2+ back-conversion when over-saturated (beta > 1): explicit
    r = r + params.k1 * np.minimum(s, 0.0) * C
    r = np.clip(r, -F / dt, C / dt)
    if params.beta > 0:
        ceiling = cmax / params.beta
        cap = np.where(F <= ceiling, (ceiling - F) / dt, np.inf)
        r = np.minimum(r, cap)
    if active is not None:
        r = np.where(active, r, 0.0)
    C_new = C - dt * r
    F_new = F + dt * r
    r_oh = q * F_new
    if active is not None:
        r_oh = np.where(active, r_oh, 0.0)
    return C_new, F_new, r, r_oh


# ---------------------------------------------------------------------------
# 7-point stencil assembly


class Stencil:
    """CSR sparsity pattern of the 7-point operator on a grid, built once.

    ``matrix(diag, w)`` fills the pattern with ``diag`` on the diagonal and
    ``-w`` on both off-diagonal entries of every interior face.
    """

    def __init__(self, dims):
        n = int(np.prod(dims))
        idx = np.arange(n, dtype=np.int64).reshape(dims)
        lo, hi, axis = [], [], []
        for a in range(3):
            s_lo = [slice(None)] * 3
            s_hi = [slice(None)] * 3
            s_lo[a] = slice(0, -1)
            s_hi[a] = slice(1, None)
            lo.append(idx[tuple(s_lo)].ravel())
            hi.append(idx[tuple(s_hi)].ravel())
            axis.append(np.full(lo[-1].size, a, dtype=np.int8))
        self.n = n
        self.dims = tuple(dims)
        self.lo = np.concatenate(lo)
        self.hi = np.concatenate(hi)
        self.axis = np.concatenate(axis)
        nf = self.lo.size
        diag = np.arange(n, dtype=np.int64)
        rows = np.concatenate([diag, self.lo, self.hi])
        cols = np.concatenate([diag, self.hi, self.lo])
        order = np.lexsort((cols, rows))
        self.indices = cols[order].astype(np.int32)
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))]).astype(np.int32)
        pos = np.empty(rows.size, dtype=np.int64)
        pos[order] = np.arange(rows.size)
        self.pos_diag = pos[:n]
        self.pos_lohi = pos[n:n + nf]
        self.pos_hilo = pos[n + nf:]
        self.nnz = rows.size

    def face_values(self, nodal):
        """Harmonic mean of a nodal field across every face."""
        v = np.asarray(nodal, dtype=float).reshape(-1)
        a = v[self.lo]
        b = v[self.hi]
        s = a + b
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(s > 0, 2.0 * a * b / s, 0.0)
        return out

    def row_sums(self, w):
        return (np.bincount(self.lo, weights=w, minlength=self.n)
                + np.bincount(self.hi, weights=w, minlength=self.n))

    def matrix(self, diag, w) -> sp.csr_matrix:
        data = np.empty(self.nnz)
        data[self.pos_diag] = diag
        data[self.pos_lohi] = -w
        data[self.pos_hilo] = -w
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


@functools.lru_cache(maxsize=8)
def stencil_for(dims) -> Stencil:
    return Stencil(tuple(dims))


def diffusion_system(grid: StructuredGrid, d_nodal, dt: float, face_mask=None):
    """Backward-Euler matrix ``I + dt * L`` for ``div(D grad C)`` with no-flux walls."""
    st = stencil_for(grid.dims)
    w = st.face_values(d_nodal) * (dt / grid.spacing ** 2)
    if face_mask is not None:
        w = np.where(face_mask, w, 0.0)
    diag = 1.0 + st.row_sums(w)
    return st, diag, w


# ---------------------------------------------------------------------------


@dataclass
class StepInfo:
    """Per-step diagnostics returned by :func:`transport_step`."""

    reports: dict = field(default_factory=dict)
    clipped: int = 0
    r_film: Optional[np.ndarray] = None
    r_mg: Optional[np.ndarray] = None
    r_oh: Optional[np.ndarray] = None


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NumericalFailureError(f"non-finite values in {name}")


def _solve(name, A, rhs, x0, tol, max_iter, info):
    x, rep = linalg.solve(A, rhs, tol=tol, max_iter=max_iter, x0=x0)
    info.reports[name] = rep
    if not rep.converged:
        raise SolverFailureError(
            f"{name} solve did not converge: residual {rep.final_residual:.3e} "
            f"(scaled {rep.scaled_residual:.3e}) after {rep.iterations} iterations",
            residual=rep.final_residual)
    _check_finite(name, x)
    return x


def transport_step(state: ChemState, phi: LevelSetField, params: MaterialParams, dt: float,
                   tol: float = 1e-9, max_iter: int = 5000):
    """Advance ``state`` by ``dt``; returns ``(new_state, StepInfo)``."""
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    grid = state.grid
    if phi.grid != grid:
        raise InvalidArgumentError("state and level set live on different grids")
    info = StepInfo()
    ph = phi.values.reshape(-1)
    solid = ph >= 0.0
    inside = ph > 0.0
    fluid = ~solid

    C, F, Cl, OH = (a.reshape(-1) for a in state.arrays())
    for name, arr in zip(("c_mg", "c_film", "c_cl", "c_oh"), (C, F, Cl, OH)):
        _check_finite(name, arr)

    C1, F1, r, r_oh = react(C, F, Cl, params, dt, active=fluid)
    F1 = np.where(solid, 0.0, F1)
    info.r_film = r
    info.r_mg = -r
    info.r_oh = r_oh

    st = stencil_for(grid.dims)

    # Mg2+: film-limited diffusivity, penalty pins solid nodes to saturation
    d_mg = effective_diffusivity(params.D_mg, F, params)
    _, diag, w = diffusion_system(grid, d_mg, dt)
    rhs = C1.copy()
    x0 = C1.copy()
    if solid.any():
        pen = PENALTY_FACTOR * float(diag.max())
        diag = diag + np.where(solid, pen, 0.0)
        rhs = np.where(solid, pen * params.mg_sat, rhs)
        x0 = np.where(solid, params.mg_sat, x0)
    mg_new = _solve("c_mg", st.matrix(diag, w), rhs, x0, tol, max_iter, info)

    # Cl- and OH-: no flux across faces touching the interior of the solid
    open_face = ~(inside[st.lo] | inside[st.hi])
    d_cl = effective_diffusivity(params.D_cl, F, params)
    _, diag, w = diffusion_system(grid, d_cl, dt, open_face)
    cl_new = _solve("c_cl", st.matrix(diag, w), Cl, Cl, tol, max_iter, info)

    d_oh = effective_diffusivity(params.D_oh, F, params)
    _, diag, w = diffusion_system(grid, d_oh, dt, open_face)
    rhs = OH + dt * r_oh
    oh_new = _solve("c_oh", st.matrix(diag, w), rhs, rhs, tol, max_iter, info)

    clipped = 0
    out = []
    for arr in (mg_new, F1, cl_new, oh_new):
        neg = arr < 0
        clipped += int(neg.sum())
        out.append(np.where(neg, 0.0, arr).reshape(grid.dims))
    info.clipped = clipped
    new = ChemState.from_arrays(grid, *out, time=state.time + dt)
    return new, info


def step_transport(state: ChemState, phi: LevelSetField, params: MaterialParams, dt: float,
                   tol: float = 1e-9, max_iter: int = 5000) -> ChemState:
    """One backward-Euler step of the four transport equations."""
    return transport_step(state, phi, params, dt, tol, max_iter)[0]


def total_mass(field: ScalarField) -> float:
    return float(field.values.sum() * field.grid.cell_volume)
