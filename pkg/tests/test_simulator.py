import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ganfault.exceptions import DomainError, ParseError, SimulationError
from ganfault.simulator import (
    ClosedLoopSystem,
    Dataset,
    FaultSpec,
    Normalization,
    load_dataset,
    read_config,
    save_dataset,
    simulate,
    system_from_config,
    window_normalize,
)


@pytest.fixture(scope="module")
def system():
    return ClosedLoopSystem.default()


def test_no_faults_all_normal(system):
    ds = simulate(system, 300, seed=1)
    assert len(ds) == 300
    assert set(ds.labels) == {"normal"}
    np.testing.assert_allclose(np.diff(ds.t), 60.0)


def test_deterministic(system):
    a = simulate(system, 400, seed=5)
    b = simulate(system, 400, seed=5)
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.y, b.y)
    c = simulate(system, 400, seed=6)
    assert not np.array_equal(a.y, c.y)


@pytest.mark.parametrize("offset", [2.0, -2.0, 4.0, -4.0])
def test_sensor_bias_paired_runs(system, offset):
    base = simulate(system, 400, seed=3)
    f = FaultSpec("sensor-bias", 0, offset, 100, 200)
    faulty = simulate(system, 400, [f], seed=3)
    diff = faulty.y - base.y
    np.testing.assert_allclose(diff[100:200, 0], offset, atol=1e-12)
    # y0 is monitored only, so nothing else moves
    assert np.all(diff[:100] == 0)
    assert np.all(diff[200:] == 0)
    assert np.all(diff[:, 1:] == 0)
    np.testing.assert_array_equal(faulty.u, base.u)
    assert faulty.labels[100] == "fault:sensor_bias_0"
    assert faulty.labels[99] == "normal" and faulty.labels[200] == "normal"


def test_bias_on_controlled_channel_is_causal(system):
    ch = system.controlled[0]
    base = simulate(system, 300, seed=2)
    faulty = simulate(system, 300, [FaultSpec("sensor-bias", ch, 2.0, 120, 200)], seed=2)
    assert np.all(faulty.y[:120] == base.y[:120])
    assert np.all(faulty.u[:120] == base.u[:120])
    assert np.abs(faulty.u[120:] - base.u[120:]).max() > 0


def test_stuck_actuator_level(system):
    f = FaultSpec("stuck-actuator", 1, 0.5, 50, 90, "stuck")
    ds = simulate(system, 120, [f], seed=0)
    expect = 0.5 * (system.u_max - system.u_min) + system.u_min
    np.testing.assert_array_equal(ds.u[50:90, 1], expect)
    assert ds.labels[60] == "fault:stuck"


def test_setpoint_offset_shifts_tracking(system):
    ch = system.controlled[0]
    base = simulate(system, 700, seed=4)
    faulty = simulate(system, 700, [FaultSpec("setpoint-offset", ch, 1.0, 100, 700)], seed=4)
    assert faulty.y[400:700, ch].mean() - base.y[400:700, ch].mean() > 0.5


@pytest.mark.parametrize("bad", [
    FaultSpec("melt", 0, 1.0, 0, 10),
    FaultSpec("sensor-bias", 9, 1.0, 0, 10),
    FaultSpec("stuck-actuator", 0, 1.5, 0, 10),
    FaultSpec("sensor-bias", 0, 1.0, 50, 500),
    FaultSpec("sensor-bias", 0, 1.0, 10, 10),
    FaultSpec("setpoint-offset", 0, 1.0, 0, 10),
])
def test_invalid_faults(system, bad):
    with pytest.raises(DomainError):
        simulate(system, 100, [bad])


def test_overlapping_faults_rejected(system):
    faults = [FaultSpec("sensor-bias", 0, 1.0, 0, 50), FaultSpec("sensor-bias", 1, 1.0, 40, 60)]
    with pytest.raises(DomainError, match="overlap"):
        simulate(system, 100, faults)


def test_instability_names_step(system):
    unstable = ClosedLoopSystem.default()
    unstable.A = 1.5 * np.eye(unstable.n)
    with pytest.raises(SimulationError) as err:
        simulate(unstable, 500, seed=0)
    assert err.value.step is not None
    assert f"step {err.value.step}" in str(err.value)


def test_window_degenerate(system):
    ds = simulate(system, 50, seed=0)
    w = window_normalize(ds, 1, 1)
    assert w.X.shape == (50, ds.m + ds.q)
    assert w.X.min() >= 0 and w.X.max() <= 1


def test_window_shapes_and_labels(system):
    ds = simulate(system, 200, [FaultSpec("sensor-bias", 0, 4.0, 100, 150, "b")], seed=0)
    w = window_normalize(ds, 8, 2)
    assert w.X.shape == ((200 - 8) // 2 + 1, 8 * (ds.m + ds.q))
    for i, lab in enumerate(w.labels):
        recs = ds.labels[2 * i:2 * i + 8]
        assert lab == ("normal" if all(r == "normal" for r in recs) else "fault:b")
    # window layout: record-major, channels u.. then y..
    norm = ds.normalization()
    np.testing.assert_allclose(w.X[3, :ds.m + ds.q], norm.apply(ds.channels[6]))


def test_midpoint_normalization():
    n = Normalization(np.array([10.0]), np.array([30.0]))
    assert n.apply(np.array([20.0]))[0] == 0.5


def test_constant_channel_warns():
    ds = Dataset(np.arange(5.0), np.ones((5, 1)), np.arange(5.0)[:, None], ["normal"] * 5)
    w = window_normalize(ds, 2, 1)
    assert w.warnings and "constant" in w.warnings[0]
    np.testing.assert_array_equal(w.X[:, 0], 0.5)


def test_faulty_values_not_clamped(system):
    base = simulate(system, 600, seed=1)
    ds = simulate(system, 600, [FaultSpec("sensor-bias", 0, 30.0, 400, 600)], seed=1)
    norm = base.normalization()
    w = window_normalize(ds, 1, 1, norm=norm)
    assert w.X[400:, ds.m].max() > 1.0
    normal = window_normalize(base, 4, 1)
    assert normal.X.min() >= 0.0 and normal.X.max() <= 1.0


def test_normalization_from_normal_records_only(system):
    ds = simulate(system, 600, [FaultSpec("sensor-bias", 0, 50.0, 300, 400)], seed=1)
    norm = ds.normalization()
    assert norm.hi[ds.m] < 40
    assert window_normalize(ds, 3, 3).norm.hi[ds.m] == norm.hi[ds.m]


def test_window_errors(system):
    ds = simulate(system, 5, seed=0)
    with pytest.raises(DomainError):
        window_normalize(ds, 6, 1)
    with pytest.raises(DomainError):
        window_normalize(ds, 0, 1)
    two = simulate(system, 40, [FaultSpec("sensor-bias", 0, 1.0, 10, 20, "a"),
                                FaultSpec("sensor-bias", 1, 1.0, 20, 30, "b")], seed=0)
    with pytest.raises(DomainError, match="mixes"):
        window_normalize(two, 4, 1)


def test_csv_round_trip(system, tmp_path):
    ds = simulate(system, 120, [FaultSpec("sensor-bias", 0, 2.0, 20, 40, "bias_y0")], seed=9)
    path = tmp_path / "d.csv"
    save_dataset(ds, path)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.u, ds.u)
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_array_equal(back.t, ds.t)
    assert back.labels == ds.labels
    assert "fault:bias_y0" in back.labels
    assert path.read_text().splitlines()[0] == "t,u0,u1,y0,y1,y2,label"


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=30))
def test_csv_round_trip_property(tmp_path_factory, vals):
    k = len(vals) // 3
    if k == 0:
        return
    arr = np.array(vals[:3 * k]).reshape(k, 3)
    ds = Dataset(np.arange(k, dtype=float), arr[:, :1], arr[:, 1:], ["normal"] * k)
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    save_dataset(ds, path)
    back = load_dataset(path)
    np.testing.assert_allclose(back.channels, ds.channels, rtol=1e-12, atol=0)


@pytest.mark.parametrize("text, line", [
    ("t,u0,y0,label\n0,1,2,normal\n1,2,normal\n", 3),
    ("t,u0,y0,label\n0,1,nan,normal\n", 2),
    ("t,u0,y0,label\n0,1,x,normal\n", 2),
    ("t,u0,y0,label\n0,1,2,broken\n", 2),
    ("time,u0,y0,label\n0,1,2,normal\n", 1),
])
def test_csv_parse_errors(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError) as err:
        load_dataset(path)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_config(tmp_path):
    path = tmp_path / "p.cfg"
    path.write_text(
        "n = 4\nhorizon = 500\nseed = 11\nsample_period_s = 30\n"
        "fault.kind = sensor-bias\nfault.channel = 0\nfault.offset = 2\n"
        "fault.start = 100\nfault.end = 200\n"
    )
    system, horizon, faults, seed = system_from_config(read_config(path))
    assert (horizon, seed, system.sample_period_s) == (500, 11, 30.0)
    assert faults == [FaultSpec("sensor-bias", 0, 2.0, 100, 200)]
    with pytest.raises(ParseError, match="unknown"):
        system_from_config({"colour": "blue"})
    with pytest.raises(ParseError, match="missing"):
        system_from_config({"fault.kind": "sensor-bias"})
