import numpy as np
import pytest

from subgoals import sim as fsim
from subgoals.percept import normalize_percept
from subgoals.sim import (ACCEPT_FRUIT, ASK_NICELY, BASKET_ACCEPT,
                          BASKET_REJECT, CHANGE_HANDS, COLLECTION, D_CLASSIFY,
                          D_PLACE, DISCARD_FRUIT, GRIPPER_LEFT, GRIPPER_RIGHT,
                          ON_SCALE, PICK_FRUIT, PLACE_FRUIT, PRESS_BUTTON,
                          SHAPED_CLASSIFY, SHAPED_GRASP, SHAPED_SIDE,
                          SHAPED_TEST, STATE_BAD, STATE_GOOD, STATE_NONE,
                          SimConfig, TABLE_CENTER, TEST_FRUIT, apply_policy,
                          dump_state, extrinsic_reward, observe,
                          phase_for_trial, reset, restore_state)


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def _state(phase=4, seed=0, **fruit_kw):
    state = reset(SimConfig(), phase, _rng(seed))
    for key, value in fruit_kw.items():
        setattr(state.fruit, key, value)
    return state


# -- reset / phases --------------------------------------------------------------

def test_reset_scale_power_follows_phase():
    assert reset(SimConfig(), 1, _rng()).scale.powered is False
    assert reset(SimConfig(), 2, _rng()).scale.powered is False
    assert reset(SimConfig(), 3, _rng()).scale.powered is True
    assert reset(SimConfig(), 4, _rng()).scale.powered is True


def test_reset_deterministic():
    a = reset(SimConfig(), 4, _rng(7))
    b = reset(SimConfig(), 4, _rng(7))
    assert dump_state(a) == dump_state(b)


def test_reset_places_fruit_in_collection_area():
    cfg = SimConfig()
    for seed in range(20):
        s = reset(cfg, 1, _rng(seed))
        assert s.fruit.location == COLLECTION
        assert cfg.collection_angle[0] <= s.fruit.angle <= cfg.collection_angle[1]
        assert cfg.collection_dist[0] <= s.fruit.dist <= cfg.collection_dist[1]
        assert cfg.weighing_angle[0] <= s.scale.angle <= cfg.weighing_angle[1]
        assert not s.button_light and not s.scale.active


def test_phase_for_trial_boundaries():
    cfg = SimConfig()
    assert phase_for_trial(cfg, 10) == 1
    assert phase_for_trial(cfg, 20) == 1
    assert phase_for_trial(cfg, 21) == 2
    assert phase_for_trial(cfg, 100) == 2
    assert phase_for_trial(cfg, 125) == 2
    assert phase_for_trial(cfg, 126) == 3
    assert phase_for_trial(cfg, 140) == 3
    assert phase_for_trial(cfg, 150) == 3
    assert phase_for_trial(cfg, 151) == 4
    assert phase_for_trial(cfg, 750) == 4
    with pytest.raises(ValueError):
        phase_for_trial(cfg, 0)
    with pytest.raises(ValueError):
        phase_for_trial(cfg, 751)


# -- policies -------------------------------------------------------------------

def test_pick_grasps_on_fruit_side():
    s = _state(angle=0.8)
    assert apply_policy(s, PICK_FRUIT) == []
    assert s.fruit.location == GRIPPER_LEFT
    s = _state(angle=-0.8)
    apply_policy(s, PICK_FRUIT)
    assert s.fruit.location == GRIPPER_RIGHT


def test_pick_from_center_uses_other_arm():
    s = _state(angle=0.8)
    apply_policy(s, PICK_FRUIT)          # left gripper
    apply_policy(s, PLACE_FRUIT)         # to table center
    assert s.fruit.location == TABLE_CENTER
    apply_policy(s, PICK_FRUIT)
    assert s.fruit.location == GRIPPER_RIGHT


def test_test_fruit_requires_power_and_side():
    s = _state(phase=1, angle=0.8)
    s.scale.angle = 0.5
    apply_policy(s, PICK_FRUIT)
    assert apply_policy(s, TEST_FRUIT) != []  # unpowered scale
    s = _state(phase=4, angle=0.8, valid=True)
    s.scale.angle = -0.5                      # scale on the right side
    apply_policy(s, PICK_FRUIT)               # fruit in left gripper
    assert apply_policy(s, TEST_FRUIT) != []  # wrong side
    s.scale.angle = 0.5
    assert apply_policy(s, TEST_FRUIT) == []
    assert s.fruit.location == ON_SCALE
    assert s.scale.active and s.scale.state == STATE_GOOD
    assert (s.fruit.angle, s.fruit.dist) == (s.scale.angle, s.scale.dist)


def test_scale_state_encodes_validity():
    for valid, expected in ((True, STATE_GOOD), (False, STATE_BAD)):
        s = _state(phase=4, angle=0.8, valid=valid)
        s.scale.angle = 0.5
        apply_policy(s, PICK_FRUIT)
        apply_policy(s, TEST_FRUIT)
        assert s.scale.state == expected
        raw = observe(s)
        assert raw[8] == 1.0 and raw[9] == (1 if valid else 2)
        percept = normalize_percept(raw)
        assert percept.scale_state == (0.5 if valid else 1.0)


def test_accept_and_discard_move_fruit_and_clear_scale():
    for policy, basket in ((ACCEPT_FRUIT, BASKET_ACCEPT), (DISCARD_FRUIT, BASKET_REJECT)):
        s = _state(phase=4, angle=0.8, valid=True)
        s.scale.angle = 0.5
        apply_policy(s, PICK_FRUIT)
        apply_policy(s, TEST_FRUIT)
        assert apply_policy(s, policy) == []
        assert s.fruit.location == basket
        assert not s.scale.active and s.scale.state == STATE_NONE


def test_accept_requires_active_scale():
    s = _state(phase=4)
    assert apply_policy(s, ACCEPT_FRUIT) != []


def test_change_hands_dimension_threshold():
    s = _state(angle=0.8, dim=0.09)
    apply_policy(s, PICK_FRUIT)
    before = dump_state(s)
    assert apply_policy(s, CHANGE_HANDS) != []
    assert dump_state(s) == before          # identity on failure
    s = _state(angle=0.8, dim=0.05)
    apply_policy(s, PICK_FRUIT)
    assert apply_policy(s, CHANGE_HANDS) == []
    assert s.fruit.location == GRIPPER_RIGHT


def test_ask_nicely_only_when_no_fruit():
    s = _state(phase=4, angle=0.8, valid=True)
    assert apply_policy(s, ASK_NICELY) != []
    s.scale.angle = 0.5
    apply_policy(s, PICK_FRUIT)
    apply_policy(s, TEST_FRUIT)
    apply_policy(s, ACCEPT_FRUIT)
    assert apply_policy(s, ASK_NICELY) == []
    assert s.fruit.location == COLLECTION


def test_press_button_toggles():
    s = _state()
    assert observe(s)[5] == 0.0
    apply_policy(s, PRESS_BUTTON)
    assert observe(s)[5] == 1.0
    apply_policy(s, PRESS_BUTTON)
    assert observe(s)[5] == 0.0


def test_observe_grasped_fruit_frozen_and_bits():
    s = _state(angle=0.8)
    angle, dist = s.fruit.angle, s.fruit.dist
    apply_policy(s, PICK_FRUIT)
    raw = observe(s)
    assert raw[0] == angle and raw[1] == dist
    assert raw[6] == 1.0 and raw[7] == 0.0
    s2 = _state(phase=4, angle=0.8, valid=True)
    s2.scale.angle = 0.5
    apply_policy(s2, PICK_FRUIT)
    apply_policy(s2, TEST_FRUIT)
    apply_policy(s2, ACCEPT_FRUIT)
    raw = observe(s2)
    assert raw[0] == raw[1] == raw[2] == 0.0  # basket fruit is absent


def test_dump_restore_round_trip():
    s = _state(phase=3, angle=-0.3)
    apply_policy(s, PICK_FRUIT)
    text = dump_state(s)
    restored = restore_state(text)
    assert dump_state(restored) == text
    # restored rng continues identically
    assert restored.rng.random() == s.rng.random()


# -- rewards -----------------------------------------------------------------

def test_d_place_reward_phase2_only():
    for phase, expected in ((2, [D_PLACE]), (1, [])):
        s = _state(phase=phase, angle=0.8)
        apply_policy(s, PICK_FRUIT)
        before = s.copy()
        apply_policy(s, PLACE_FRUIT)
        assert extrinsic_reward(before, s, phase, "twopronged") == expected


def test_d_classify_reward_correctness():
    for valid, policy, expected in (
        (True, ACCEPT_FRUIT, [D_CLASSIFY]),
        (False, DISCARD_FRUIT, [D_CLASSIFY]),
        (True, DISCARD_FRUIT, []),
        (False, ACCEPT_FRUIT, []),
    ):
        s = _state(phase=4, angle=0.8, valid=valid)
        s.scale.angle = 0.5
        apply_policy(s, PICK_FRUIT)
        apply_policy(s, TEST_FRUIT)
        before = s.copy()
        apply_policy(s, policy)
        assert extrinsic_reward(before, s, 4, "topdown") == expected


def test_baseline_shaped_rewards():
    s = _state(phase=4, angle=0.8, dim=0.05, valid=True)
    s.scale.angle = -0.5  # scale right, fruit left: forces a side fix
    before = s.copy()
    apply_policy(s, PICK_FRUIT)
    assert extrinsic_reward(before, s, 4, "baseline") == [SHAPED_GRASP]
    before = s.copy()
    apply_policy(s, CHANGE_HANDS)
    assert extrinsic_reward(before, s, 4, "baseline") == [SHAPED_SIDE]
    before = s.copy()
    apply_policy(s, TEST_FRUIT)
    assert extrinsic_reward(before, s, 4, "baseline") == [SHAPED_TEST]
    before = s.copy()
    apply_policy(s, ACCEPT_FRUIT)
    assert extrinsic_reward(before, s, 4, "baseline") == [D_CLASSIFY, SHAPED_CLASSIFY]
    # non-baseline conditions carry no shaped channels
    s2 = _state(phase=4, angle=0.8)
    before = s2.copy()
    apply_policy(s2, PICK_FRUIT)
    assert extrinsic_reward(before, s2, 4, "twopronged") == []


# -- scripted optimal-path oracle ------------------------------------------------

def scripted_optimal(state):
    """pick, optional side fix, test, classify; returns policies executed."""
    executed = []

    def run(policy):
        events = apply_policy(state, policy)
        assert events == [], f"{policy} failed unexpectedly"
        executed.append(policy)

    run(PICK_FRUIT)
    if not fsim.grasped_on_scale_side(state):
        if state.fruit.dim < state.config.change_hands_max_dim:
            run(CHANGE_HANDS)
        else:
            run(PLACE_FRUIT)
            run(PICK_FRUIT)
    run(TEST_FRUIT)
    run(ACCEPT_FRUIT if state.fruit.valid else DISCARD_FRUIT)
    return executed


def test_scripted_oracle_grid():
    cfg = SimConfig()
    count = 0
    for fruit_angle in np.linspace(-1.1, 1.1, 8):
        for scale_angle in np.linspace(-0.9, 0.9, 8):
            for dim in (0.04, 0.06, 0.083, 0.095):
                for valid in (True, False):
                    s = reset(cfg, 4, _rng(count))
                    s.fruit.angle = float(fruit_angle)
                    s.fruit.dim = float(dim)
                    s.fruit.valid = valid
                    s.scale.angle = float(scale_angle)
                    before = s.copy()
                    executed = scripted_optimal(s)
                    assert 3 <= len(executed) <= 5
                    rewards = extrinsic_reward(before, s, 4, "topdown")
                    assert s.fruit.location == (BASKET_ACCEPT if valid else BASKET_REJECT)
                    count += 1
    assert count == 512
