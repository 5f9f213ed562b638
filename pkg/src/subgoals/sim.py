"""Discrete-event fruit-sorting environment.

One fruit is in play at a time.  The robot's two arms split the table into
half-planes (angle >= 0 belongs to the left arm); a fruit can only be tested
on the scale by the gripper on the scale's side, which forces the
hand-change sub-task.  Fruit validity is a hidden coin flip revealed only by
the powered scale.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .percept import DIM_RANGE

# Fruit locations
COLLECTION = "collection"
TABLE_CENTER = "table_center"
GRIPPER_LEFT = "gripper_left"
GRIPPER_RIGHT = "gripper_right"
ON_SCALE = "scale"
BASKET_ACCEPT = "basket_accept"
BASKET_REJECT = "basket_reject"

GRIPPERS = (GRIPPER_LEFT, GRIPPER_RIGHT)
ON_TABLE = (COLLECTION, TABLE_CENTER)

# Scale states
STATE_NONE = 0
STATE_GOOD = 1
STATE_BAD = 2

PICK_FRUIT = "pick_fruit"
TEST_FRUIT = "test_fruit"
ACCEPT_FRUIT = "accept_fruit"
DISCARD_FRUIT = "discard_fruit"
CHANGE_HANDS = "change_hands"
PLACE_FRUIT = "place_fruit"
ASK_NICELY = "ask_nicely"
PRESS_BUTTON = "press_button"

POLICIES = (PICK_FRUIT, TEST_FRUIT, ACCEPT_FRUIT, DISCARD_FRUIT,
            CHANGE_HANDS, PLACE_FRUIT, ASK_NICELY, PRESS_BUTTON)

FAILURE = "failure"

# Extrinsic reward channels
D_PLACE = "d_place"
D_CLASSIFY = "d_classify"
SHAPED_GRASP = "shaped_grasp"
SHAPED_SIDE = "shaped_side"
SHAPED_TEST = "shaped_test"
SHAPED_CLASSIFY = "shaped_classify"
SHAPED_CHANNELS = (SHAPED_GRASP, SHAPED_SIDE, SHAPED_TEST, SHAPED_CLASSIFY)


@dataclass
class SimConfig:
    collection_angle: tuple[float, float] = (-1.2, 1.2)
    collection_dist: tuple[float, float] = (1.3, 1.8)
    weighing_angle: tuple[float, float] = (-1.0, 1.0)
    weighing_dist: tuple[float, float] = (0.5, 1.0)
    table_center: tuple[float, float] = (0.0, 0.9)  # (angle, dist)
    change_hands_max_dim: float = 0.085
    validity_probability: float = 0.5
    phase_boundaries: tuple[int, int, int] = (20, 125, 150)
    total_trials: int = 750
    max_iterations: int = 20


@dataclass
class Fruit:
    angle: float
    dist: float
    dim: float
    valid: bool
    location: str = COLLECTION
    # Gripper that last held the fruit; picking from the table center uses
    # the opposite arm (both arms reach the center).
    last_gripper: str = GRIPPER_LEFT


@dataclass
class Scale:
    angle: float
    dist: float
    powered: bool
    active: bool = False
    state: int = STATE_NONE


@dataclass
class SimState:
    config: SimConfig
    fruit: Optional[Fruit]
    scale: Scale
    button_light: bool
    rng: np.random.Generator

    def copy(self) -> "SimState":
        """Snapshot for before/after reward comparison (rng shared)."""
        return SimState(self.config, copy.copy(self.fruit), copy.copy(self.scale),
                        self.button_light, self.rng)


def left_side(angle: float) -> bool:
    return angle >= 0.0


def phase_for_trial(config: SimConfig, trial: int) -> int:
    """Curriculum phase for a 1-based trial index."""
    if not 1 <= trial <= config.total_trials:
        raise ValueError(f"trial {trial} out of range [1, {config.total_trials}]")
    b1, b2, b3 = config.phase_boundaries
    if trial <= b1:
        return 1
    if trial <= b2:
        return 2
    if trial <= b3:
        return 3
    return 4


def _new_fruit(config: SimConfig, rng: np.random.Generator) -> Fruit:
    return Fruit(
        angle=rng.uniform(*config.collection_angle),
        dist=rng.uniform(*config.collection_dist),
        dim=rng.uniform(*DIM_RANGE),
        valid=bool(rng.random() < config.validity_probability),
    )


def reset(config: SimConfig, phase: int, rng: np.random.Generator) -> SimState:
    """Fresh world for one trial; the scale is powered from phase 3 on."""
    fruit = _new_fruit(config, rng)
    scale = Scale(
        angle=rng.uniform(*config.weighing_angle),
        dist=rng.uniform(*config.weighing_dist),
        powered=phase >= 3,
    )
    return SimState(config, fruit, scale, button_light=False, rng=rng)


def grasped_gripper(state: SimState) -> Optional[str]:
    if state.fruit is not None and state.fruit.location in GRIPPERS:
        return state.fruit.location
    return None


def grasped_on_scale_side(state: SimState) -> bool:
    g = grasped_gripper(state)
    if g is None:
        return False
    scale_left = left_side(state.scale.angle)
    return (g == GRIPPER_LEFT) == scale_left


def fruit_in_play(state: SimState) -> bool:
    return state.fruit is not None and state.fruit.location not in (BASKET_ACCEPT, BASKET_REJECT)


def apply_policy(state: SimState, policy: str) -> list[str]:
    """Execute one policy in place; failed preconditions leave the state
    untouched and yield a failure event."""
    fruit = state.fruit
    cfg = state.config

    if policy == PICK_FRUIT:
        if fruit is None or fruit.location not in ON_TABLE:
            return [f"{FAILURE}:{policy}"]
        if fruit.location == TABLE_CENTER:
            # Both arms reach the center: re-pick with the other arm.
            gripper = GRIPPER_RIGHT if fruit.last_gripper == GRIPPER_LEFT else GRIPPER_LEFT
        else:
            gripper = GRIPPER_LEFT if left_side(fruit.angle) else GRIPPER_RIGHT
        fruit.location = gripper
        fruit.last_gripper = gripper
        return []

    if policy == TEST_FRUIT:
        if not (state.scale.powered and grasped_on_scale_side(state)):
            return [f"{FAILURE}:{policy}"]
        fruit.location = ON_SCALE
        fruit.angle = state.scale.angle
        fruit.dist = state.scale.dist
        state.scale.active = True
        state.scale.state = STATE_GOOD if fruit.valid else STATE_BAD
        return []

    if policy in (ACCEPT_FRUIT, DISCARD_FRUIT):
        if not state.scale.active:
            return [f"{FAILURE}:{policy}"]
        fruit.location = BASKET_ACCEPT if policy == ACCEPT_FRUIT else BASKET_REJECT
        state.scale.active = False
        state.scale.state = STATE_NONE
        return []

    if policy == CHANGE_HANDS:
        g = grasped_gripper(state)
        if g is None or fruit.dim >= cfg.change_hands_max_dim:
            return [f"{FAILURE}:{policy}"]
        other = GRIPPER_RIGHT if g == GRIPPER_LEFT else GRIPPER_LEFT
        fruit.location = other
        fruit.last_gripper = other
        return []

    if policy == PLACE_FRUIT:
        if grasped_gripper(state) is None:
            return [f"{FAILURE}:{policy}"]
        fruit.location = TABLE_CENTER
        fruit.angle, fruit.dist = cfg.table_center
        return []

    if policy == ASK_NICELY:
        if fruit_in_play(state):
            return [f"{FAILURE}:{policy}"]
        state.fruit = _new_fruit(cfg, state.rng)
        return []

    if policy == PRESS_BUTTON:
        state.button_light = not state.button_light
        return []

    raise ValueError(f"unknown policy {policy!r}")


def observe(state: SimState) -> tuple:
    """Raw sensor tuple in physical units, matching the percept layout.

    An absent fruit (none in play, or deposited in a basket) reads as zeros
    on components 0-2; a grasped fruit keeps its grasp-time position.
    """
    if fruit_in_play(state) or grasped_gripper(state) is not None:
        f = state.fruit
        fruit_raw = (f.angle, f.dist, f.dim)
    else:
        fruit_raw = (0.0, 0.0, 0.0)
    g = grasped_gripper(state)
    return (
        *fruit_raw,
        state.scale.angle,
        state.scale.dist,
        1.0 if state.button_light else 0.0,
        1.0 if g == GRIPPER_LEFT else 0.0,
        1.0 if g == GRIPPER_RIGHT else 0.0,
        1.0 if state.scale.active else 0.0,
        state.scale.state,
    )


def _classified_correctly(before: SimState, after: SimState) -> bool:
    if after.fruit is None or before.fruit is None:
        return False
    arrived = (before.fruit.location not in (BASKET_ACCEPT, BASKET_REJECT)
               and after.fruit.location in (BASKET_ACCEPT, BASKET_REJECT))
    if not arrived:
        return False
    if after.fruit.location == BASKET_ACCEPT:
        return after.fruit.valid
    return not after.fruit.valid


def extrinsic_reward(before: SimState, after: SimState, phase: int,
                     condition: str) -> list[str]:
    """Reward events for the transition; the baseline condition adds shaped
    rewards on every canonical-progress step toward a correct classification."""
    events: list[str] = []
    if phase == 2:
        placed = (after.fruit is not None and after.fruit.location == TABLE_CENTER
                  and (before.fruit is None or before.fruit.location != TABLE_CENTER))
        if placed:
            events.append(D_PLACE)
    if phase == 4 and _classified_correctly(before, after):
        events.append(D_CLASSIFY)

    if condition == "baseline":
        grasped_from_collection = (
            before.fruit is not None and before.fruit.location == COLLECTION
            and grasped_gripper(after) is not None
        )
        if grasped_from_collection:
            events.append(SHAPED_GRASP)
        if grasped_on_scale_side(after) and not grasped_on_scale_side(before):
            events.append(SHAPED_SIDE)
        if after.scale.active and not before.scale.active:
            events.append(SHAPED_TEST)
        if _classified_correctly(before, after):
            events.append(SHAPED_CLASSIFY)
    return events


# -- scenario dump/restore (scripted integration tests) -----------------------

def _rng_to_json(rng: np.random.Generator) -> dict:
    st = rng.bit_generator.state
    return {
        "bit_generator": st["bit_generator"],
        "counter": [int(x) for x in st["state"]["counter"]],
        "key": [int(x) for x in st["state"]["key"]],
        "buffer": [int(x) for x in st["buffer"]],
        "buffer_pos": int(st["buffer_pos"]),
        "has_uint32": int(st["has_uint32"]),
        "uinteger": int(st["uinteger"]),
    }


def _rng_from_json(doc: dict) -> np.random.Generator:
    bg = np.random.Philox()
    bg.state = {
        "bit_generator": doc["bit_generator"],
        "state": {
            "counter": np.array(doc["counter"], dtype=np.uint64),
            "key": np.array(doc["key"], dtype=np.uint64),
        },
        "buffer": np.array(doc["buffer"], dtype=np.uint64),
        "buffer_pos": doc["buffer_pos"],
        "has_uint32": doc["has_uint32"],
        "uinteger": doc["uinteger"],
    }
    return np.random.Generator(bg)


def dump_state(state: SimState) -> str:
    doc = {
        "config": asdict(state.config),
        "fruit": asdict(state.fruit) if state.fruit else None,
        "scale": asdict(state.scale),
        "button_light": state.button_light,
        "rng": _rng_to_json(state.rng),
    }
    return json.dumps(doc, sort_keys=True)


def restore_state(text: str) -> SimState:
    doc = json.loads(text)
    cfg_doc = doc["config"]
    for key in ("collection_angle", "collection_dist", "weighing_angle",
                "weighing_dist", "table_center", "phase_boundaries"):
        cfg_doc[key] = tuple(cfg_doc[key])
    config = SimConfig(**cfg_doc)
    fruit = Fruit(**doc["fruit"]) if doc["fruit"] else None
    scale = Scale(**doc["scale"])
    return SimState(config, fruit, scale, doc["button_light"], _rng_from_json(doc["rng"]))
