import numpy as np
import pytest

from magdeg.calibration import (CalibrationProblem, Hyperparams, bayes_minimize,
                                expected_improvement, gp_fit, objective, optimize)
from magdeg.config import FreeParam, load_config
from magdeg.errors import InvalidArgumentError, NumericalFailureError


def test_gp_interpolates_training_points(rng):
    X = rng.random((8, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    model = gp_fit(X, y)
    mean, std = model.predict(X)
    assert np.max(np.abs(mean - y)) <= 0.05 * np.ptp(y) + 3 * model.noise_std
    assert np.all(std >= 0)


def test_gp_fixed_hyperparameters(rng):
    X = rng.random((5, 1))
    model = gp_fit(X, X[:, 0], Hyperparams(np.array([0.3]), 1.0, 1e-6))
    mean, _ = model.predict(np.array([[0.5]]))
    assert mean[0] == pytest.approx(0.5, abs=0.05)


def test_expected_improvement_properties(rng):
    X = np.linspace(0, 1, 6)[:, None]
    y = (X[:, 0] - 0.3) ** 2
    model = gp_fit(X, y)
    ei = expected_improvement(model, X, y.min())
    assert np.all(ei >= 0)
    assert np.all(ei <= 1e-3 * np.ptp(y) + 1e-12)
    far = expected_improvement(model, np.array([[0.3]]), y.min())
    assert far[0] >= ei.max()


def test_quadratic_argmin():
    res = bayes_minimize(lambda u: (u[0] - 0.37) ** 2, 1, 15, seed=0)
    assert abs(res.best_x[0] - 0.37) <= 0.05
    best = [e.best for e in res.trace]
    assert all(b <= a for a, b in zip(best, best[1:]))
    assert len(res.trace) == 15


def test_failed_evaluations_are_penalized():
    calls = []

    def f(u):
        calls.append(u)
        if len(calls) == 3:
            raise NumericalFailureError("boom")
        return float(np.sum(u))

    res = bayes_minimize(f, 2, 6, seed=1)
    failed = [e for e in res.trace if e.failed]
    assert len(failed) == 1
    worst_ok = max(e.y for e in res.trace[:2])
    assert failed[0].y == pytest.approx(10 * worst_ok)


def test_seeded_runs_repeat():
    f = lambda u: float(np.sum((u - 0.2) ** 2))  # noqa: E731
    a = bayes_minimize(f, 2, 8, seed=4)
    b = bayes_minimize(f, 2, 8, seed=4)
    assert [e.y for e in a.trace] == [e.y for e in b.trace]


def test_budget_below_initial_design():
    with pytest.raises(InvalidArgumentError):
        bayes_minimize(lambda u: 0.0, 3, 5)


def problem(tiny_toml, **kw):
    cfg = load_config(tiny_toml())
    defaults = dict(free_params=[FreeParam("D_mg", 1e-4, 1e-2, True), FreeParam("gamma", 0, 1)],
                    reference_curve=[(0.1, 1.0), (0.2, 2.0)], base_params=cfg.materials,
                    sim_config=cfg, k2_grid=(1e10, 1e15), budget=6)
    defaults.update(kw)
    return CalibrationProblem(**defaults)


def test_unit_scaling_round_trip(tiny_toml):
    pr = problem(tiny_toml)
    x = (1e-3, 0.25)
    u = pr.to_unit(x)
    assert u == pytest.approx([0.5, 0.25])
    assert pr.from_unit(u) == pytest.approx(x)


@pytest.mark.parametrize("kw", [dict(free_params=[]),
                                dict(free_params=[FreeParam("gamma", 1, 0)]),
                                dict(reference_curve=[(1.0, 0.0), (0.5, 1.0)]),
                                dict(budget=3)])
def test_problem_validation(tiny_toml, kw):
    with pytest.raises(InvalidArgumentError):
        problem(tiny_toml, **kw)


def test_objective_rejects_out_of_bounds(tiny_toml):
    with pytest.raises(InvalidArgumentError):
        objective((1.0, 0.5), problem(tiny_toml))


def test_optimize_runs_every_k2(tiny_toml):
    pr = problem(tiny_toml)

    def fake(x, k2):
        return (np.log10(x[0]) + 3) ** 2 + x[1] + (0.0 if k2 == 1e15 else 1.0)

    best_x, best_y, trace = optimize(pr, seed=0, func=fake)
    assert len(trace) == 2 * pr.budget
    assert {e.k2 for e in trace} == {1e10, 1e15}
    assert best_x[-1] == 1e15
    assert best_y == min(e.y for e in trace)


def test_objective_is_zero_on_own_curve(tiny_toml):
    from magdeg.calibration import simulate_hydrogen

    pr = problem(tiny_toml, free_params=[FreeParam("gamma", 0.0, 1.0)], budget=4)
    times = [0.1, 0.2, 0.25]
    ref = simulate_hydrogen(pr.params_for((0.5,)), pr.sim_config, times)
    pr = problem(tiny_toml, free_params=[FreeParam("gamma", 0.0, 1.0)], budget=4,
                 reference_curve=list(zip(times, ref)))
    assert objective((0.5,), pr) == pytest.approx(0.0, abs=1e-12)
    assert objective((0.9,), pr) > 0
