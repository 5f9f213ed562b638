"""The per-iteration sense -> activate -> select -> act -> learn cycle.

One CognitiveRun owns an LTM, a simulator and a motivation system for a
whole 750-trial lifetime.  Every stochastic draw flows from named
sub-streams of the run seed, so a run is fully reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import sim as fsim
from .ltm import LTM, CNode, GoalNode, RewardPredicate
from .motivation import EffectEvent, MotivationSystem, SubgoalCandidate
from .percept import BINARY_COMPONENTS, Percept, normalize_percept
from .regions import NEGATIVE, POSITIVE, ConfidenceTracker, PointStore, Region, RegionModel

CONDITIONS = ("baseline", "topdown", "twopronged")

# Drive-root activation levels: the extrinsic task always outranks the
# intrinsic pursuit of unlearned effect goals.
EXTRINSIC_ACTIVATION = 1.0
EFFECT_ACTIVATION = 0.9


@dataclass
class RunParams:
    condition: str
    seed: int
    trials: int = 750
    max_iterations: int = 20
    confidence_window: int = 20
    theta_contain: float = 0.95
    attenuation: float = 0.8
    epsilon_explore: float = 0.05
    contain_samples: int = 100
    mlp_hidden: tuple[int, ...] = (128, 64, 32)
    learning_rate: float = 1e-3


@dataclass
class IterationTrace:
    step: int
    trial: int
    phase: int
    percept_before: tuple
    selected_policy: str
    explored: bool
    percept_after: tuple
    rewards_fired: list[str]
    extrinsic_events: list[str]
    nodes_created: list[str]
    outcomes: dict[str, int]
    cognitive_action: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrialOutcome:
    trial: int
    phase: int
    iterations: int
    achieved_final: bool


class CognitiveRun:
    """Single-threaded cognitive loop for one experiment run."""

    def __init__(self, params: RunParams, sim_config: fsim.SimConfig | None = None):
        if params.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {params.condition!r}")
        self.params = params
        self.sim_config = sim_config or fsim.SimConfig(
            total_trials=params.trials, max_iterations=params.max_iterations)
        root = np.random.SeedSequence(params.seed)
        sim_seq, select_seq, contain_seq, self._region_seq = root.spawn(4)
        self.rng_sim = np.random.Generator(np.random.Philox(sim_seq))
        self.rng_select = np.random.Generator(np.random.Philox(select_seq))
        rng_contain = np.random.Generator(np.random.Philox(contain_seq))
        self._region_count = 0

        self.ltm = LTM()
        self.wm = self.ltm.add_world_model("fruit_table")
        for name in fsim.POLICIES:
            self.ltm.add_policy(name, environment=True)

        cond = params.condition
        self.motivation = MotivationSystem(
            self.ltm,
            region_factory=self.new_region,
            rng=rng_contain,
            theta_contain=params.theta_contain,
            contain_samples=params.contain_samples,
            effect_env_enabled=cond in ("topdown", "twopronged"),
            effect_internal_enabled=cond in ("topdown", "twopronged"),
            prospection_enabled=cond == "twopronged",
        )
        self._build_initial_nodes()
        self.step = 0
        self.satisfied: set[str] = set()  # goals achieved in the current trial
        # C-nodes whose policy just no-opped; suppressed while the percept
        # stays unchanged, otherwise the deterministic argmax would repeat
        # the same futile action forever.
        self._suppressed: set[str] = set()
        self._suppressed_percept: Optional[Percept] = None
        self.traces: list[IterationTrace] = []
        self.keep_traces = False

    # -- construction -------------------------------------------------------

    def new_region(self, kind: str, name: str) -> Region:
        """Fresh region with a per-node seed derived from the run seed."""
        self._region_count += 1
        seed = np.random.SeedSequence(
            entropy=self._region_seq.entropy,
            spawn_key=(*self._region_seq.spawn_key, self._region_count),
        )
        model = RegionModel(seed, hidden=self.params.mlp_hidden,
                            learning_rate=self.params.learning_rate)
        train_seq = np.random.SeedSequence(
            entropy=self._region_seq.entropy,
            spawn_key=(*self._region_seq.spawn_key, self._region_count, 1),
        )
        return Region(
            node_id="", kind=kind, model=model,
            store=PointStore(),
            tracker=ConfidenceTracker(self.params.confidence_window),
            train_rng=np.random.Generator(np.random.Philox(train_seq)),
        )

    def _add_region_goal(self, name: str, provenance: str,
                         predicate: RewardPredicate | None) -> GoalNode:
        return self.ltm.add_goal(name, provenance, self.new_region("goal", name), predicate)

    def _build_initial_nodes(self) -> None:
        cond = self.params.condition
        # Designer-given extrinsic goals; active only in their phase.
        self.goal_place = self._add_region_goal(
            "drive:place", "extrinsic", RewardPredicate("drive", fsim.D_PLACE))
        self.goal_classify = self._add_region_goal(
            "drive:classify", "extrinsic", RewardPredicate("drive", fsim.D_CLASSIFY))
        self.shaped_goals: list[GoalNode] = []
        if cond == "baseline":
            for channel in fsim.SHAPED_CHANNELS:
                self.shaped_goals.append(self._add_region_goal(
                    f"shaped:{channel}", "extrinsic", RewardPredicate("drive", channel)))
        # Bookkeeping goals mirroring the cognitive drives.
        self.ltm.add_goal("cognitive:novel_state", "cognitive", None, None)
        if cond in ("topdown", "twopronged"):
            self.ltm.add_goal("cognitive:effect_goal_created", "cognitive", None, None)
            self.ltm.add_goal("cognitive:subgoal_created", "cognitive", None, None)
            self.ltm.add_policy("create_effect_goal", environment=False)
            self.ltm.add_policy("create_topdown_subgoal", environment=False)
        if cond == "twopronged":
            self.ltm.add_goal("cognitive:subgoal_linked", "cognitive", None, None)
            self.ltm.add_policy("link_subgoal", environment=False)

    # -- per-iteration machinery ---------------------------------------------

    def _assign_drive_activations(self, phase: int) -> None:
        for goal in self.ltm.goals.values():
            goal.drive_activation = 0.0
            goal.activation = 0.0
        if phase == 2:
            self.goal_place.drive_activation = EXTRINSIC_ACTIVATION
        if phase == 4:
            self.goal_classify.drive_activation = EXTRINSIC_ACTIVATION
        for goal in self.shaped_goals:
            goal.drive_activation = EXTRINSIC_ACTIVATION
        for goal in self.ltm.goals.values():
            if goal.provenance == "effect" and goal.drive_active:
                goal.drive_activation = EFFECT_ACTIVATION
        self.ltm.cascade_goal_activation(self.satisfied)

    def _reward_fired(self, goal: GoalNode, edges: list[int],
                      ext_events: list[str],
                      pnode_pre: dict[str, float],
                      pnode_post: dict[str, float]) -> bool:
        pred = goal.reward_predicate
        if pred is None:
            return False
        if pred.kind == "drive":
            return pred.target in ext_events
        if pred.kind == "sensor":
            return pred.target in edges
        if pred.kind == "pnode":
            # Reward on entering the region; a policy that merely keeps the
            # state inside would otherwise breed self-satisfying contexts.
            return pnode_pre[pred.target] < 0.5 <= pnode_post[pred.target]
        raise ValueError(f"unknown predicate kind {pred.kind!r}")

    def run_iteration(self, state: fsim.SimState, trial: int, phase: int) -> IterationTrace:
        self.step += 1
        percept_pre = normalize_percept(fsim.observe(state))

        if percept_pre != self._suppressed_percept:
            self._suppressed.clear()
            self._suppressed_percept = percept_pre

        self._assign_drive_activations(phase)
        policy, selected = self.ltm.propagate_and_select(
            percept_pre, self.rng_select, self.params.epsilon_explore,
            suppressed=self._suppressed)

        before = state.copy()
        events = fsim.apply_policy(state, policy.name)
        percept_post = normalize_percept(fsim.observe(state))
        if selected is not None and events:
            self._suppressed.add(selected.id)

        edges = [i for i in BINARY_COMPONENTS
                 if percept_pre[i] == 0.0 and percept_post[i] == 1.0]
        ext_events = fsim.extrinsic_reward(before, state, phase, self.params.condition)

        # Reward predicates are evaluated against pre-update weights.
        watched = {
            g.reward_predicate.target
            for g in self.ltm.goals.values()
            if g.reward_predicate is not None and g.reward_predicate.kind == "pnode"
        }
        pnode_pre = {pid: self.ltm.pnodes[pid].region.predict(percept_pre) for pid in watched}
        pnode_post = {pid: self.ltm.pnodes[pid].region.predict(percept_post) for pid in watched}
        fired = {
            gid: self._reward_fired(g, edges, ext_events, pnode_pre, pnode_post)
            for gid, g in self.ltm.goals.items()
        }

        nodes_created: list[str] = []
        outcomes: dict[str, int] = {}
        rewards_fired = [gid for gid, f in fired.items()
                         if f and self.ltm.goals[gid].activation > 0.0]

        # P-node bookkeeping: positives for every achieved active goal under
        # the executed policy; a negative for the selected context that missed.
        for gid in rewards_fired:
            cnode = self.ltm.cnode_for_context(self.wm.id, gid, policy.id)
            if cnode is None:
                name = f"pre:{gid}:{policy.name}"
                region = self.new_region("pnode", name)
                pnode = self.ltm.add_pnode(name, region)
                cnode = self.ltm.add_cnode(self.wm.id, gid, pnode.id, policy.id)
                nodes_created.extend([pnode.id, cnode.id])
            region = self.ltm.pnodes[cnode.pnode].region
            predicted = region.predict(percept_pre) >= 0.5
            region.add_labeled(percept_pre, POSITIVE, self.step)
            outcomes[cnode.pnode] = 1 if predicted else 0
            region.tracker.record_outcome(outcomes[cnode.pnode])

        # Every C-node of the executed policy whose goal was active had its
        # context tested by this execution; the ones whose goal missed are
        # scored, and false applicability claims collect the pre-state as a
        # counterexample.  The selected C-node always records its miss.
        for cnode in self.ltm.cnodes.values():
            if cnode.policy != policy.id or fired[cnode.goal]:
                continue
            if self.ltm.goals[cnode.goal].activation <= 0.0:
                continue
            region = self.ltm.pnodes[cnode.pnode].region
            predicted = region.predict(percept_pre) >= 0.5
            if selected is not None and cnode.id == selected.id:
                region.add_labeled(percept_pre, NEGATIVE, self.step)
                outcomes[cnode.pnode] = 0 if predicted else 1
                region.tracker.record_outcome(outcomes[cnode.pnode])
            elif predicted:
                region.add_labeled(percept_pre, NEGATIVE, self.step)
                outcomes[cnode.pnode] = 0
                region.tracker.record_outcome(0)

        # Goal-region bookkeeping: the achieved state is a positive point;
        # a pursued goal that did not fire collects the reached state as a
        # negative, scored only when the region wrongly claimed achievement.
        pursued_goal = selected.goal if selected is not None else None
        for gid, goal in self.ltm.goals.items():
            if goal.region is None:
                continue
            if gid in rewards_fired:
                predicted = goal.region.predict(percept_post) >= 0.5
                goal.region.add_labeled(percept_post, POSITIVE, self.step)
                outcomes[gid] = 1 if predicted else 0
                goal.region.tracker.record_outcome(outcomes[gid])
            elif gid == pursued_goal and not fired[gid]:
                # The reached state is a counterexample; the confidence is
                # only debited when the region claimed an achievement event
                # (entering its area) that the reward did not confirm.
                claimed = (goal.region.predict(percept_pre) < 0.5
                           <= goal.region.predict(percept_post))
                goal.region.add_labeled(percept_post, NEGATIVE, self.step)
                if claimed:
                    outcomes[gid] = 0
                    goal.region.tracker.record_outcome(0)

        # An achieved goal's drive is reduced for the rest of the trial.
        self.satisfied.update(gid for gid, f in fired.items() if f)

        # Learned effect goals stop being pursued for their own sake.
        for goal in self.ltm.goals.values():
            if (goal.provenance == "effect" and goal.drive_active
                    and goal.region.is_learned()):
                goal.drive_active = False

        cognitive_action = self._cognitive_step(edges, fired, phase, nodes_created)

        trace = IterationTrace(
            step=self.step, trial=trial, phase=phase,
            percept_before=tuple(percept_pre), selected_policy=policy.name,
            explored=selected is None, percept_after=tuple(percept_post),
            rewards_fired=rewards_fired, extrinsic_events=ext_events,
            nodes_created=nodes_created, outcomes=outcomes,
            cognitive_action=cognitive_action,
        )
        if self.keep_traces:
            self.traces.append(trace)
        return trace

    def _cognitive_step(self, edges: list[int], fired: dict[str, bool],
                        phase: int, nodes_created: list[str]) -> Optional[str]:
        """At most one cognitive policy fires per iteration, in priority
        order: environment effectance, internal effectance, prospection."""
        if self.motivation.effect_env_enabled:
            covered = {
                g.reward_predicate.target
                for g in self.ltm.goals.values()
                if g.reward_predicate is not None
                and g.reward_predicate.kind == "sensor"
                and (g.drive_active or g.activation > 0.0)
            }
            for sensor in edges:
                if sensor in covered:
                    continue
                goal = self.motivation.create_effect_goal(EffectEvent(sensor, phase))
                if goal is not None:
                    nodes_created.append(goal.id)
                    return f"create_effect_goal:{goal.id}"
        if self.motivation.eval_effectance_internal():
            pnode = self.motivation._next_learned_pnode()
            goal = self.motivation.create_topdown_subgoal(pnode)
            nodes_created.append(goal.id)
            return f"create_topdown_subgoal:{goal.id}"
        if self.motivation.prospection_enabled:
            candidates = self.motivation.find_subgoal_candidates()
            if candidates:
                result = self.motivation.link_subgoal(candidates[0])
                return f"link_subgoal:{candidates[0].parent}->{candidates[0].child}"
        return None

    # -- trials ------------------------------------------------------------------

    def run_trial(self, trial: int) -> TrialOutcome:
        """One episode: up to 20 iterations, ending early when the phase's
        terminal reward fires (placing in phase 2, classifying in phase 4)."""
        phase = fsim.phase_for_trial(self.sim_config, trial)
        state = fsim.reset(self.sim_config, phase, self.rng_sim)
        self.satisfied.clear()
        self._suppressed.clear()
        self._suppressed_percept = None
        achieved = False
        iterations = 0
        for _ in range(self.params.max_iterations):
            trace = self.run_iteration(state, trial, phase)
            iterations += 1
            if phase == 2 and fsim.D_PLACE in trace.extrinsic_events:
                achieved = True
                break
            if phase == 4 and fsim.D_CLASSIFY in trace.extrinsic_events:
                achieved = True
                break
        return TrialOutcome(trial, phase, iterations, achieved)

    # -- exports ---------------------------------------------------------------

    def region_snapshots(self) -> list[dict]:
        snaps = []
        for goal in self.ltm.goals.values():
            if goal.region is not None:
                snaps.append(goal.region.snapshot())
        for pnode in self.ltm.pnodes.values():
            snaps.append(pnode.region.snapshot())
        return snaps
