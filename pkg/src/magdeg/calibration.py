"""Bayesian-optimization calibration against hydrogen-evolution curves.

The surrogate is an exact Gaussian process with a squared-exponential kernel
on the unit cube; targets are standardized before fitting and hyperparameters
are re-picked from a small log-spaced grid by marginal likelihood every round.
New points maximize expected improvement.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from .config import FreeParam, SimConfig
from .errors import InvalidArgumentError, MagdegError, NumericalFailureError
from .transport import MaterialParams

LENGTH_GRID = (0.05, 0.1, 0.2, 0.4, 0.8)
SIGNAL_GRID = (0.5, 1.0, 2.0)
NOISE_GRID = (1e-6, 1e-4, 1e-2)
JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)


# ---------------------------------------------------------------------------
# Gaussian process


@dataclass(frozen=True)
class Hyperparams:
    lengthscales: Tuple[float, ...]
    signal_var: float = 1.0
    noise_var: float = 1e-6


def _sq_exp(a, b, ls, sv):
    d = (a[:, None, :] - b[None, :, :]) / np.asarray(ls)
    return sv * np.exp(-0.5 * np.sum(d * d, axis=-1))


def _cholesky(K, noise):
    n = K.shape[0]
    for jitter in JITTERS:
        try:
            return sla.cholesky(K + (noise + jitter) * np.eye(n), lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalFailureError("covariance matrix is singular even with jitter")


@dataclass(frozen=True, eq=False)
class GPModel:
    X: np.ndarray
    y: np.ndarray
    hyper: Hyperparams
    y_mean: float
    y_std: float
    chol: np.ndarray
    weights: np.ndarray
    jitter: float = 0.0
    log_marginal: float = 0.0

    @property
    def noise_std(self) -> float:
        """Observation noise standard deviation in the units of ``y``."""
        return math.sqrt(self.hyper.noise_var) * self.y_std

    @property
    def prior_var(self) -> float:
        return self.hyper.signal_var * self.y_std ** 2

    def predict(self, x):
        """Posterior mean and standard deviation at ``x`` (shape ``(m, d)`` or ``(d,)``)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = self.hyper
        ks = _sq_exp(x, self.X, h.lengthscales, h.signal_var)
        mu = ks @ self.weights
        v = sla.solve_triangular(self.chol, ks.T, lower=True)
        var = np.maximum(h.signal_var - np.sum(v * v, axis=0), 0.0)
        return self.y_mean + self.y_std * mu, self.y_std * np.sqrt(var)


def _fit_fixed(X, ys, hyper):
    K = _sq_exp(X, X, hyper.lengthscales, hyper.signal_var)
    L, jitter = _cholesky(K, hyper.noise_var)
    w = sla.cho_solve((L, True), ys)
    lml = -0.5 * ys @ w - np.sum(np.log(np.diag(L))) - 0.5 * len(ys) * math.log(2 * math.pi)
    return L, w, jitter, lml


def gp_fit(X, y, hyperparams: Optional[Hyperparams] = None) -> GPModel:
    """Fit a GP to ``(X, y)`` on the unit cube.

    With ``hyperparams=None`` the lengthscale per dimension, signal variance
    and noise variance are chosen from fixed grids by marginal likelihood.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise InvalidArgumentError("X and y have different lengths")
    if y.size < 2:
        raise InvalidArgumentError("need at least two observations")
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("observations must be finite")
    mean = float(y.mean())
    std = float(y.std())
    if std == 0.0:
        std = 1.0
    ys = (y - mean) / std
    d = X.shape[1]
    if hyperparams is not None:
        candidates = [hyperparams]
    else:
        candidates = [Hyperparams(ls, sv, nv)
                      for ls in itertools.product(LENGTH_GRID, repeat=d)
                      for sv in SIGNAL_GRID for nv in NOISE_GRID]
    best = None
    for hyper in candidates:
        try:
            L, w, jitter, lml = _fit_fixed(X, ys, hyper)
        except NumericalFailureError:
            continue
        if best is None or lml > best[-1]:
            best = (hyper, L, w, jitter, lml)
    if best is None:
        raise NumericalFailureError("no hyperparameter setting gave a positive definite covariance")
    hyper, L, w, jitter, lml = best
    return GPModel(X, y, hyper, mean, std, L, w, jitter, lml)


def expected_improvement(model: GPModel, x, best_y: float):
    """Expected improvement below ``best_y``; zero where the predictive sd vanishes."""
    mu, sd = model.predict(x)
    imp = best_y - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / sd, 0.0)
    ei = np.where(sd > 0, imp * norm.cdf(z) + sd * norm.pdf(z), 0.0)
    ei = np.maximum(ei, 0.0)
    return float(ei[0]) if np.ndim(x) == 1 else ei


# ---------------------------------------------------------------------------
# generic loop on the unit cube


@dataclass
class Evaluation:
    x: np.ndarray  # unit-cube coordinates
    params: Tuple[float, ...]  # physical values
    y: float
    failed: bool
    best: float
    k2: float = float("nan")


@dataclass
class BayesResult:
    best_x: np.ndarray
    best_y: float
    trace: List[Evaluation]


def _maximize_ei(model, best_y, rng, dim, n_starts=10):
    starts = rng.random((n_starts, dim))
    starts = np.vstack([starts, model.X[np.argmin(model.y)]])
    best_x, best_v = None, -np.inf
    bounds = [(0.0, 1.0)] * dim
    for s in starts:
        res = minimize(lambda u: -expected_improvement(model, u, best_y), s,
                       method="L-BFGS-B", bounds=bounds)
        v = -float(res.fun)
        if v > best_v:
            best_x, best_v = np.clip(res.x, 0.0, 1.0), v
    return best_x, best_v


def bayes_minimize(func: Callable, dim: int, budget: int, seed: int = 0,
                   to_physical: Callable = None, label: float = float("nan")) -> BayesResult:
    """Minimize ``func`` over ``[0, 1]^dim`` with ``budget`` evaluations.

    ``func`` receives a unit-cube point.  If it raises :class:`MagdegError`
    or returns a non-finite value, the point is scored at ten times the worst
    value seen so far and flagged as failed.
    """
    n_init = 2 * dim
    if budget < n_init:
        raise InvalidArgumentError(f"budget {budget} is below the {n_init} initial points")
    rng = np.random.default_rng(seed)
    to_physical = to_physical or (lambda u: tuple(float(v) for v in u))
    init = qmc.LatinHypercube(d=dim, seed=rng).random(n_init)
    trace: List[Evaluation] = []
    X, Y = [], []

    def evaluate(u):
        failed = False
        try:
            y = float(func(u))
            if not math.isfinite(y):
                raise NumericalFailureError("non-finite objective")
        except MagdegError:
            failed = True
            worst = max((abs(v) for v in Y), default=1.0)
            y = 10.0 * max(worst, 1e-12)
        X.append(np.asarray(u, dtype=float))
        Y.append(y)
        best = min(Y)
        trace.append(Evaluation(np.asarray(u, dtype=float), to_physical(u), y, failed, best, label))

    for u in init:
        evaluate(u)
    while len(Y) < budget:
        model = gp_fit(np.array(X), np.array(Y))
        u, ei = _maximize_ei(model, min(Y), rng, dim)
        if ei <= 0 or np.min(np.linalg.norm(np.array(X) - u, axis=1)) < 1e-6:
            u = rng.random(dim)
        evaluate(u)
    i = int(np.argmin(Y))
    return BayesResult(X[i], Y[i], trace)


# ---------------------------------------------------------------------------
# hydrogen-curve calibration


@dataclass
class CalibrationProblem:
    free_params: Sequence[FreeParam]
    reference_curve: Sequence[Tuple[float, float]]
    base_params: MaterialParams
    sim_config: SimConfig
    k2_grid: Sequence[float] = ()
    budget: int = 40

    def __post_init__(self):
        self.free_params = tuple(self.free_params)
        if not self.free_params:
            raise InvalidArgumentError("at least one free parameter is required")
        for p in self.free_params:
            if not p.lo < p.hi:
                raise InvalidArgumentError(f"{p.name}: need lo < hi")
            if p.log and p.lo <= 0:
                raise InvalidArgumentError(f"{p.name}: log-scaled bounds must be positive")
        times = [t for t, _ in self.reference_curve]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidArgumentError("reference curve must be sorted by time")
        if self.budget < 2 * (self.dim + 1):
            raise InvalidArgumentError("budget must be >= 2*(dim + 1)")
        self.k2_grid = tuple(self.k2_grid) or (self.base_params.k2,)

    @property
    def dim(self) -> int:
        return len(self.free_params)

    @property
    def names(self):
        return tuple(p.name for p in self.free_params)

    def to_unit(self, x):
        out = []
        for p, v in zip(self.free_params, x):
            if p.log:
                out.append((math.log(v) - math.log(p.lo)) / (math.log(p.hi) - math.log(p.lo)))
            else:
                out.append((v - p.lo) / (p.hi - p.lo))
        return np.asarray(out)

    def from_unit(self, u):
        out = []
        for p, s in zip(self.free_params, np.clip(u, 0.0, 1.0)):
            if p.log:
                out.append(math.exp(math.log(p.lo) + s * (math.log(p.hi) - math.log(p.lo))))
            else:
                out.append(p.lo + s * (p.hi - p.lo))
        return tuple(out)

    def params_for(self, x, k2=None) -> MaterialParams:
        changes = dict(zip(self.names, (float(v) for v in x)))
        if k2 is not None:
            changes["k2"] = float(k2)
        return dataclasses.replace(self.base_params, **changes)


def simulate_hydrogen(params: MaterialParams, config: SimConfig, times):
    """Simulated H2 volume (mL) at ``times`` by linear interpolation of the run."""
    from .simulation import run_simulation

    result = run_simulation(config.replace(materials=params))
    s = result.series
    return np.interp(np.asarray(times, dtype=float), s.column("time_h"), s.column("hydrogen_ml"))


def objective(x, problem: CalibrationProblem, k2=None) -> float:
    """RMS difference (mL) between simulated and reference H2 at the reference times."""
    for p, v in zip(problem.free_params, x):
        if not p.lo - 1e-12 * abs(p.lo) <= v <= p.hi + 1e-12 * abs(p.hi):
            raise InvalidArgumentError(f"{p.name}={v} outside [{p.lo}, {p.hi}]")
    times = [t for t, _ in problem.reference_curve]
    ref = np.asarray([v for _, v in problem.reference_curve])
    sim = simulate_hydrogen(problem.params_for(x, k2), problem.sim_config, times)
    return float(np.sqrt(np.mean((sim - ref) ** 2)))


def optimize(problem: CalibrationProblem, seed: int = 0,
             func: Optional[Callable] = None):
    """Run Bayesian optimization separately for every ``k2`` in the grid.

    Returns ``(best_x, best_y, trace)`` where ``best_x`` holds the physical
    free-parameter values followed by the winning ``k2``, and ``trace`` lists
    every evaluation in order (``budget`` per ``k2`` value).  ``func(x, k2)``
    replaces the simulation-backed objective when given.
    """
    func = func or (lambda x, k2: objective(x, problem, k2))
    trace: List[Evaluation] = []
    best = None
    for k2 in problem.k2_grid:
        res = bayes_minimize(lambda u: func(problem.from_unit(u), k2), problem.dim,
                             problem.budget, seed, problem.from_unit, k2)
        trace.extend(res.trace)
        if best is None or res.best_y < best[1]:
            best = ((*problem.from_unit(res.best_x), k2), res.best_y)
    return best[0], best[1], trace
