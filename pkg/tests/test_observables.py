import numpy as np
import pytest

from magdeg.errors import InvalidArgumentError
from magdeg.grid import Cuboid, LevelSetField, ScalarField, make_grid, sdf_build
from magdeg.observables import (COLUMNS, TimeSeries, avg_ph, hydrogen_volume, mass_loss,
                                oh_from_ph, ph_field, ph_value, probe_line)
from magdeg.transport import MaterialParams


def test_hydrogen_by_hand():
    # 0.5 g / 24.305 g/mol * 8.314 * 295.15 / 101325 m^3
    expected = 0.5 / 24.305 * 8.314 * 295.15 / 101325 * 1e6
    assert hydrogen_volume(0.5, MaterialParams()) == pytest.approx(expected, rel=1e-12)
    assert abs(hydrogen_volume(0.5, MaterialParams()) - 498.0) <= 1.0


def test_hydrogen_rejects_negative_mass():
    assert hydrogen_volume(0.0, MaterialParams()) == 0.0
    with pytest.raises(InvalidArgumentError):
        hydrogen_volume(-1e-3, MaterialParams())


def test_mass_loss_of_removed_layer():
    g = make_grid((6, 6, 6), 0.25)
    p = MaterialParams()
    big = sdf_build(Cuboid((3, 3, 3), (1.5, 1.5, 1.0)), g)
    small = sdf_build(Cuboid((3, 3, 3), (1.5, 1.5, 0.75)), g)
    assert mass_loss(big, big, p) == 0.0
    removed = 3.0 * 3.0 * 0.5
    assert mass_loss(small, big, p) == pytest.approx(p.mg_sol * removed, rel=0.02)


@pytest.mark.parametrize("ph", [3.0, 7.0, 7.4, 12.5])
def test_ph_round_trip(ph):
    assert ph_value(oh_from_ph(ph)) == pytest.approx(ph, abs=1e-12)


def test_ph_floor():
    assert ph_value(0.0, floor=oh_from_ph(5.0)) == pytest.approx(5.0)
    with pytest.raises(InvalidArgumentError):
        ph_value(0.0)


def test_ph_field_defaults_to_smallest_positive_floor():
    g = make_grid((1, 1, 1), 0.5)
    v = np.full(g.dims, oh_from_ph(8.0))
    v[0, 0, 0] = 0.0
    out = ph_field(ScalarField(g, v)).values
    assert np.allclose(out, 8.0)


def test_avg_ph_averages_fluid_concentration():
    g = make_grid((1, 1, 1), 0.5)
    phi = -np.ones(g.dims)
    phi[0, 0, 0] = 1.0
    c = np.full(g.dims, oh_from_ph(7.0))
    c[0, 0, 0] = oh_from_ph(13.0)  # solid node is ignored
    assert avg_ph(ScalarField(g, c), LevelSetField.from_array(g, phi)) == pytest.approx(7.0)
    with pytest.raises(InvalidArgumentError):
        avg_ph(ScalarField(g, c), LevelSetField.from_array(g, np.ones(g.dims)))


def test_probe_line_on_linear_field():
    g = make_grid((2, 2, 2), 0.5)
    x, y, z = g.coordinates()
    f = ScalarField(g, 2 * x + y - z, "dimensionless")
    samples = probe_line(f, (0, 0, 0), (2, 2, 2), 5)
    assert len(samples) == 5
    for d, v in samples:
        s = d / np.sqrt(3)
        assert v == pytest.approx(2 * s, abs=1e-12)


@pytest.mark.parametrize("args", [((0, 0, 0), (0, 0, 0), 3), ((0, 0, 0), (1, 1, 1), 1),
                                  ((0, 0, 0), (5, 0, 0), 3)])
def test_probe_line_rejects_bad_input(args):
    g = make_grid((2, 2, 2), 0.5)
    with pytest.raises(InvalidArgumentError):
        probe_line(ScalarField(g, np.zeros(g.dims)), *args)


def test_time_series_requires_increasing_time():
    ts = TimeSeries()
    ts.append(0.0, 0, 0, 7, 1)
    with pytest.raises(InvalidArgumentError):
        ts.append(0.0, 0, 0, 7, 1)
    ts.append(1.0, 1, 2, 7.5, 0.5)
    assert TimeSeries.from_rows(ts.rows()).rows() == ts.rows()
    assert list(ts.column("hydrogen_ml")) == [0.0, 2.0]
    assert len(COLUMNS) == len(ts.rows()[0])
