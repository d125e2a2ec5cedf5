import io

import numpy as np
import pytest

from erevsim import cycles
from erevsim.cycles import DrivingCycle, builtin_cycle, load_cycle, resample, write_cycle
from erevsim.errors import CycleFormatError, CycleParseError, ValidationError


def _load(text):
    return load_cycle(io.BytesIO(text.encode()), name="t")


def test_load_converts_units():
    c = _load("time_s,speed_kmh\n0,0\n1,3.6\n")
    assert c.dt == 1.0
    np.testing.assert_allclose(c.speed, [0.0, 1.0])
    np.testing.assert_array_equal(c.grade, [0.0, 0.0])


def test_load_grade_column_percent_to_ratio():
    c = _load("time_s,speed_kmh,grade_pct\n0,0,2\n1,3.6,4\n")
    np.testing.assert_allclose(c.grade, [0.02, 0.04])


def test_single_row_rejected():
    with pytest.raises(ValidationError):
        _load("time_s,speed_kmh\n0,0\n")


def test_malformed_row_reports_line():
    with pytest.raises(CycleParseError) as exc:
        _load("time_s,speed_kmh\n0,0\n1,abc\n")
    assert exc.value.line == 3


def test_nonuniform_step_is_format_error():
    with pytest.raises(CycleFormatError):
        _load("time_s,speed_kmh\n0,0\n1,1\n2.5,2\n")


def test_negative_speed_rejected():
    with pytest.raises(ValidationError):
        _load("time_s,speed_kmh\n0,0\n1,-1\n")


def test_bad_header_rejected():
    with pytest.raises(CycleParseError):
        _load("t,v\n0,0\n1,1\n")


def test_acceleration_bound():
    with pytest.raises(ValidationError):
        DrivingCycle("x", 1.0, [0.0, 6.0])


def test_ece15x5_shape():
    c = builtin_cycle("ece15x5")
    assert c.duration == 975.0
    assert c.dt == 1.0
    assert c.speed[0] == 0.0
    assert c.speed.max() == pytest.approx(50 / 3.6, abs=1e-3)


def test_ece15_segment_peak():
    assert cycles.ece15().speed.max() == pytest.approx(13.889, abs=1e-3)


def test_cbdc_statistics():
    c = builtin_cycle("cbdc-synthetic")
    assert 1200 <= c.duration <= 1400
    assert c.speed.max() * 3.6 <= 60.0 + 1e-9
    assert 15.0 <= c.mean_speed() * 3.6 <= 20.0
    assert np.abs(c.step_accel()).max() <= 1.5


def test_builtin_unknown_name():
    with pytest.raises(LookupError):
        builtin_cycle("nope")


def test_builtin_deterministic():
    a, b = builtin_cycle("cbdc-synthetic"), builtin_cycle("cbdc-synthetic")
    assert a.speed.tobytes() == b.speed.tobytes()


def test_resample_identity_and_midpoint():
    c = DrivingCycle("x", 1.0, [0.0, 2.0])
    assert resample(c, 1.0) is c
    np.testing.assert_allclose(resample(c, 0.5).speed, [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        resample(c, 0.0)


def test_resample_preserves_distance():
    c = builtin_cycle("ece15x5")
    assert resample(c, 0.5).distance() == pytest.approx(c.distance(), rel=1e-3)


def test_write_load_roundtrip():
    c = builtin_cycle("cbdc-synthetic")
    buf = io.StringIO()
    write_cycle(c, buf)
    back = load_cycle(io.StringIO(buf.getvalue()), name=c.name)
    assert np.max(np.abs(back.speed - c.speed)) < 1e-9
    assert back.dt == c.dt
