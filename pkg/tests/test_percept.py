import pytest
from hypothesis import given, strategies as st

from subgoals.percept import (ANGLE_RANGE, DIM_RANGE, DIST_RANGE,
                              CONTINUOUS_RANGES, Percept, RangeError,
                              from_unit, normalize_percept, to_unit)

RAW_BASE = (0.0, 1.0, 0.05, 0.7, 1.0, 0.0, 0.0, 0.0, 0.0, 0)


def raw_with(**kw):
    names = ["fruit_angle", "fruit_dist", "fruit_dim", "scale_angle",
             "scale_dist", "button_light", "fruit_in_left", "fruit_in_right",
             "scale_active", "scale_state"]
    raw = list(RAW_BASE)
    for key, value in kw.items():
        raw[names.index(key)] = value
    return tuple(raw)


def test_angle_endpoints_map_to_unit_interval():
    assert normalize_percept(raw_with(fruit_angle=-1.4)).fruit_angle == 0.0
    assert normalize_percept(raw_with(fruit_angle=1.4)).fruit_angle == 1.0


def test_midpoints():
    assert normalize_percept(raw_with(fruit_angle=0.0)).fruit_angle == 0.5
    assert normalize_percept(raw_with(fruit_dist=1.05)).fruit_dist == pytest.approx(0.5)


def test_scale_state_levels():
    assert normalize_percept(raw_with(scale_active=1.0, scale_state=1)).scale_state == 0.5
    assert normalize_percept(raw_with(scale_active=1.0, scale_state=2)).scale_state == 1.0
    assert normalize_percept(RAW_BASE).scale_state == 0.0


def test_absent_fruit_is_all_zero():
    p = normalize_percept(raw_with(fruit_angle=0.0, fruit_dist=0.0, fruit_dim=0.0))
    assert (p.fruit_angle, p.fruit_dist, p.fruit_dim) == (0.0, 0.0, 0.0)


def test_out_of_range_names_component():
    with pytest.raises(RangeError) as err:
        normalize_percept(raw_with(fruit_dist=2.5))
    assert "fruit_dist" in str(err.value)
    with pytest.raises(RangeError):
        normalize_percept(raw_with(fruit_dim=0.2))
    with pytest.raises(RangeError):
        normalize_percept(raw_with(button_light=0.5))
    with pytest.raises(RangeError):
        normalize_percept(raw_with(scale_state=3))


def test_validate_rejects_both_grippers():
    with pytest.raises(ValueError):
        Percept(0, 0, 0, 0.5, 0.5, 0, 1, 1, 0, 0).validate()


@given(st.integers(0, 4), st.floats(0.0, 1.0))
def test_normalization_round_trip(component, unit):
    lo, hi = CONTINUOUS_RANGES[component]
    physical = from_unit(unit, lo, hi)
    assert to_unit(physical, lo, hi) == pytest.approx(unit, abs=1e-9)


@given(st.floats(*ANGLE_RANGE), st.floats(*DIST_RANGE), st.floats(*DIM_RANGE))
def test_continuous_components_stay_in_unit_interval(angle, dist, dim):
    p = normalize_percept(raw_with(fruit_angle=angle, fruit_dist=dist, fruit_dim=dim))
    for v in p:
        assert 0.0 <= v <= 1.0
