"""Ten-component normalized percept and raw-sensor normalization.

The percept is the shared currency between the simulator, the region
classifiers and the goal graph.  Layout (fixed index order):

    0 fruit_angle   1 fruit_dist   2 fruit_dim
    3 scale_angle   4 scale_dist
    5 button_light  6 fruit_in_left  7 fruit_in_right  8 scale_active
    9 scale_state   (0 = inactive, 0.5 = good, 1.0 = bad)
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

FRUIT_ANGLE = 0
FRUIT_DIST = 1
FRUIT_DIM = 2
SCALE_ANGLE = 3
SCALE_DIST = 4
BUTTON_LIGHT = 5
FRUIT_IN_LEFT = 6
FRUIT_IN_RIGHT = 7
SCALE_ACTIVE = 8
SCALE_STATE = 9

FIELD_NAMES = (
    "fruit_angle",
    "fruit_dist",
    "fruit_dim",
    "scale_angle",
    "scale_dist",
    "button_light",
    "fruit_in_left",
    "fruit_in_right",
    "scale_active",
    "scale_state",
)

# Physical sensor ranges (camera polar coordinates and fruit size).
ANGLE_RANGE = (-1.4, 1.4)
DIST_RANGE = (0.2, 1.9)
DIM_RANGE = (0.03, 0.1)

CONTINUOUS_RANGES = {
    FRUIT_ANGLE: ANGLE_RANGE,
    FRUIT_DIST: DIST_RANGE,
    FRUIT_DIM: DIM_RANGE,
    SCALE_ANGLE: ANGLE_RANGE,
    SCALE_DIST: DIST_RANGE,
}

BINARY_COMPONENTS = (BUTTON_LIGHT, FRUIT_IN_LEFT, FRUIT_IN_RIGHT, SCALE_ACTIVE)

# Raw scale readout: 0 inactive, 1 fruit valid ("good"), 2 invalid ("bad").
SCALE_STATE_LEVELS = {0: 0.0, 1: 0.5, 2: 1.0}


class RangeError(ValueError):
    """A raw sensor value fell outside its physical range."""

    def __init__(self, component: int, value: float, lo: float, hi: float):
        self.component = component
        self.value = value
        super().__init__(
            f"component {component} ({FIELD_NAMES[component]}): "
            f"value {value!r} outside [{lo}, {hi}]"
        )


class Percept(NamedTuple):
    """Immutable normalized state vector; every component in [0, 1]."""

    fruit_angle: float
    fruit_dist: float
    fruit_dim: float
    scale_angle: float
    scale_dist: float
    button_light: float
    fruit_in_left: float
    fruit_in_right: float
    scale_active: float
    scale_state: float

    def validate(self) -> "Percept":
        for i, v in enumerate(self):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"component {i} ({FIELD_NAMES[i]}) out of [0,1]: {v}")
        for i in BINARY_COMPONENTS:
            if self[i] not in (0.0, 1.0):
                raise ValueError(f"component {i} ({FIELD_NAMES[i]}) not binary: {self[i]}")
        if self.scale_state not in (0.0, 0.5, 1.0):
            raise ValueError(f"scale_state not in {{0, 0.5, 1}}: {self.scale_state}")
        if self.fruit_in_left and self.fruit_in_right:
            raise ValueError("fruit cannot be in both grippers")
        return self


def to_unit(value: float, lo: float, hi: float) -> float:
    """Linear min-max map of a physical value onto [0, 1]."""
    return (value - lo) / (hi - lo)


def from_unit(unit: float, lo: float, hi: float) -> float:
    """Inverse of :func:`to_unit`."""
    return lo + unit * (hi - lo)


def normalize_percept(raw: Sequence[float]) -> Percept:
    """Map a raw sensor tuple (physical units) to a normalized Percept.

    Components 0-2 all zero mark "no fruit visible" (a real fruit always has
    dist >= 0.2 and dim >= 0.03) and stay zero after normalization.  The raw
    scale state uses the scale's own readout: 0 inactive, 1 good, 2 bad.
    """
    if len(raw) != 10:
        raise ValueError(f"raw tuple must have 10 components, got {len(raw)}")
    out = [0.0] * 10

    fruit_absent = raw[FRUIT_ANGLE] == 0.0 and raw[FRUIT_DIST] == 0.0 and raw[FRUIT_DIM] == 0.0
    for i, (lo, hi) in CONTINUOUS_RANGES.items():
        if fruit_absent and i in (FRUIT_ANGLE, FRUIT_DIST, FRUIT_DIM):
            out[i] = 0.0
            continue
        v = float(raw[i])
        if not lo <= v <= hi:
            raise RangeError(i, v, lo, hi)
        out[i] = to_unit(v, lo, hi)

    for i in BINARY_COMPONENTS:
        v = float(raw[i])
        if v not in (0.0, 1.0):
            raise RangeError(i, v, 0.0, 1.0)
        out[i] = v

    state = raw[SCALE_STATE]
    if state not in SCALE_STATE_LEVELS:
        raise RangeError(SCALE_STATE, state, 0, 2)
    out[SCALE_STATE] = SCALE_STATE_LEVELS[state]

    return Percept(*out).validate()
