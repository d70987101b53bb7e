import numpy as np
import pytest

from magdeg.grid import make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid():
    return make_grid((4.0, 4.0, 4.0), 0.5)


TINY_TOML = """
seed = 3

[grid]
extent = [4.0, 4.0, 4.0]
spacing = 0.5

[[geometry.union]]
type = "cuboid"
center = [2.0, 2.0, 2.0]
half_sizes = [1.0, 1.0, 0.6]

[materials]
preset = "{preset}"

[initial]
c_mg = 0.0
c_cl = 5.175e-6
ph = 7.4

[time]
dt = 0.025
t_end = 0.25

[output]
snapshot_every = 5

[calibration]
k2_grid = [1e15]
budget = 4

[[calibration.free]]
name = "gamma"
lo = 0.0
hi = 1.0
"""


@pytest.fixture
def tiny_toml(tmp_path):
    def make(preset="sbf"):
        p = tmp_path / f"tiny_{preset}.toml"
        p.write_text(TINY_TOML.format(preset=preset))
        return p
    return make


_VERDICTS = []


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` for the terminal summary."""
    def record(criterion, passed, detail):
        _VERDICTS.append((str(criterion), bool(passed), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _VERDICTS:
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
