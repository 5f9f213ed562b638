"""Drives and the cognitive policies that grow the goal graph.

Three mechanisms operate on top of the extrinsic drives:

* environment effectance: an unexpected rising edge on a binary sensor
  spawns a goal to recreate that effect;
* internal effectance: a P-node whose region becomes learned is turned into
  a new sub-goal that rewards reaching that region (top-down);
* prospection: learned goal and P-node regions are searched for containment
  relations, and matches are made explicit as attenuated goal links
  (bottom-up).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ltm import LTM, GoalLink, GoalNode, LinkRejection, PNode, RewardPredicate
from .percept import FIELD_NAMES, Percept
from .regions import POSITIVE, LabeledPoint, Region, sample_positives

THETA_CONTAIN = 0.95
CONTAIN_SAMPLES = 100

PNODE_IN_GOAL = "pnode_in_goal"
GOAL_IN_PNODE = "goal_in_pnode"
OVERLAP = "overlap"
DISJOINT = "disjoint"


@dataclass
class Drive:
    """Domain-independent deviation indicator; Eq.-style drives are binary."""

    id: str
    kind: str  # place | classify | effect_env | effect_internal | prospection | novelty
    activation: float = 0.0
    target: Optional[str] = None


@dataclass(frozen=True)
class ContainmentVerdict:
    case: str  # pnode_in_goal | goal_in_pnode | overlap | disjoint
    fraction_inside: float
    sample_size: int


@dataclass(frozen=True)
class EffectEvent:
    sensor: int  # binary percept component index (5..8)
    phase: int   # curriculum phase at occurrence; transitions are 0 -> 1 only


@dataclass(frozen=True)
class SubgoalCandidate:
    parent: str
    child: str
    case: str


MIN_CLASS_POINTS = 20


def _region_calibrated(region: Region) -> bool:
    """Containment judgments need a model that has seen enough of both
    classes; a near-single-class store saturates the classifier over the
    whole space and turns the Monte-Carlo inclusion test into noise."""
    return (region.store.positive_count >= MIN_CLASS_POINTS
            and region.store.negative_count >= MIN_CLASS_POINTS)


def detect_containment(inner_points: list[Percept], outer_model,
                       theta: float = THETA_CONTAIN,
                       contained_case: str = PNODE_IN_GOAL) -> ContainmentVerdict:
    """Monte-Carlo set-inclusion test: the share of inner points the outer
    region classifies as its own decides containment/overlap/disjoint."""
    if not inner_points:
        raise ValueError("containment test needs a non-empty inner sample")
    acts = outer_model.predict_batch(np.asarray(inner_points, dtype=np.float64))
    fraction = float(np.mean(acts >= 0.5))
    if fraction >= theta:
        case = contained_case
    elif fraction > 0.0:
        case = OVERLAP
    else:
        case = DISJOINT
    return ContainmentVerdict(case, fraction, len(inner_points))


class MotivationSystem:
    """Cognitive drives for one run; mutates the LTM under the single-writer
    cognitive loop."""

    def __init__(
        self,
        ltm: LTM,
        region_factory: Callable[[str, str], Region],
        rng: np.random.Generator,
        theta_contain: float = THETA_CONTAIN,
        contain_samples: int = CONTAIN_SAMPLES,
        effect_env_enabled: bool = True,
        effect_internal_enabled: bool = True,
        prospection_enabled: bool = True,
    ):
        self.ltm = ltm
        self.region_factory = region_factory
        self.rng = rng
        self.theta_contain = theta_contain
        self.contain_samples = contain_samples
        self.effect_env_enabled = effect_env_enabled
        self.effect_internal_enabled = effect_internal_enabled
        self.prospection_enabled = prospection_enabled
        self._effect_registry: set[tuple[int, int]] = set()
        self._link_blacklist: set[tuple[str, str]] = set()
        # verdict cache keyed on (inner, outer, direction) -> (versions, fraction)
        self._containment_cache: dict[tuple, tuple[tuple[int, int], float]] = {}

    # -- environment effectance ------------------------------------------------

    def create_effect_goal(self, event: EffectEvent) -> GoalNode | None:
        """Goal to recreate an unexpected binary-sensor effect; deduplicated
        per (sensor, curriculum phase)."""
        if not self.effect_env_enabled:
            return None
        key = (event.sensor, event.phase)
        if key in self._effect_registry:
            return None
        self._effect_registry.add(key)
        name = f"effect:{FIELD_NAMES[event.sensor]}:p{event.phase}"
        region = self.region_factory("goal", name)
        return self.ltm.add_goal(
            name, "effect", region, RewardPredicate("sensor", event.sensor)
        )

    # -- internal effectance (top-down) ------------------------------------------

    def eval_effectance_internal(self) -> int:
        """1 iff some P-node is learned and not yet consumed, else 0."""
        if not self.effect_internal_enabled:
            return 0
        return 1 if self._next_learned_pnode() is not None else 0

    def _next_learned_pnode(self) -> PNode | None:
        for pnode in self.ltm.pnodes.values():
            if (pnode.region.is_learned() and not pnode.consumed_by_topdown
                    and pnode.region.store.positive_count > 0):
                return pnode
        return None

    def _context_goal_of(self, pnode: PNode) -> str | None:
        for cnode in self.ltm.cnodes.values():
            if cnode.pnode == pnode.id:
                return cnode.goal
        return None

    def dedup_goal(self, candidate_points: list[Percept], candidate_model) -> GoalNode | None:
        """Existing learned goal whose region mutually contains the candidate
        points (both directions at the containment threshold), if any."""
        for goal in self.ltm.goals.values():
            if goal.region is None or not goal.region.is_learned():
                continue
            if not _region_calibrated(goal.region):
                continue
            forward = detect_containment(
                candidate_points, goal.region.model, self.theta_contain)
            if forward.case not in (PNODE_IN_GOAL, GOAL_IN_PNODE):
                continue
            goal_points = sample_positives(goal.region.store, self.contain_samples, self.rng)
            backward = detect_containment(goal_points, candidate_model, self.theta_contain)
            if backward.case in (PNODE_IN_GOAL, GOAL_IN_PNODE):
                return goal
        return None

    def create_topdown_subgoal(self, pnode: PNode) -> GoalNode:
        """Turn a learned P-node's region into a goal rewarding entry into
        that region, linked under the goal the P-node served."""
        if not pnode.region.is_learned():
            raise ValueError(f"{pnode.id} is not learned")
        if pnode.consumed_by_topdown:
            raise ValueError(f"{pnode.id} already consumed by top-down creation")
        context_goal = self._context_goal_of(pnode)
        existing = None
        if _region_calibrated(pnode.region):
            sample = sample_positives(pnode.region.store, self.contain_samples, self.rng)
            existing = self.dedup_goal(sample, pnode.region.model)
        pnode.consumed_by_topdown = True
        if existing is not None:
            # An equivalent goal already exists; creating another would
            # duplicate it, and linking the existing one here would smuggle
            # in a latent relationship, which is prospection's job.
            return existing
        name = f"topdown:reach:{pnode.id}"
        region = self.region_factory("goal", name)
        goal = self.ltm.add_goal(
            name, "topdown", region, RewardPredicate("pnode", pnode.id))
        for point in pnode.region.store.positives():
            region.store.add_point(LabeledPoint(point.percept, POSITIVE, point.step))
        if context_goal is not None:
            self.ltm.add_goal_link(context_goal, goal.id, "topdown")
        return goal

    # -- prospection (bottom-up) -------------------------------------------------

    def _containment_fraction(self, inner_region: Region, outer_region: Region,
                              key: tuple) -> float:
        versions = (inner_region.model.train_count, outer_region.model.train_count)
        cached = self._containment_cache.get(key)
        if cached is not None and cached[0] == versions:
            return cached[1]
        points = sample_positives(inner_region.store, self.contain_samples, self.rng)
        acts = outer_region.model.predict_batch(np.asarray(points, dtype=np.float64))
        fraction = float(np.mean(acts >= 0.5))
        self._containment_cache[key] = (versions, fraction)
        return fraction

    def find_subgoal_candidates(self) -> list[SubgoalCandidate]:
        """Containment search over every learned P-node and learned goal.

        Overlap and disjoint relations yield nothing; pairs already linked,
        blacklisted, or closing a cycle are skipped.
        """
        out: list[SubgoalCandidate] = []
        seen_pairs: set[tuple[str, str]] = set()
        learned_goals = [
            g for g in self.ltm.goals.values()
            if g.region is not None and g.region.is_learned()
            and _region_calibrated(g.region)
        ]
        for pnode in self.ltm.pnodes.values():
            if not pnode.region.is_learned() or not _region_calibrated(pnode.region):
                continue
            parent = self._context_goal_of(pnode)
            if parent is None:
                continue
            for goal in learned_goals:
                pair = (parent, goal.id)
                if goal.id == parent or pair in seen_pairs:
                    continue
                if pair in self._link_blacklist or pair in self.ltm._link_pairs:
                    continue
                if self.ltm.would_create_cycle(parent, goal.id):
                    continue
                frac = self._containment_fraction(
                    pnode.region, goal.region, (pnode.id, goal.id, "fwd"))
                if frac >= self.theta_contain:
                    out.append(SubgoalCandidate(parent, goal.id, PNODE_IN_GOAL))
                    seen_pairs.add(pair)
                    continue
                frac = self._containment_fraction(
                    goal.region, pnode.region, (pnode.id, goal.id, "bwd"))
                if frac >= self.theta_contain:
                    out.append(SubgoalCandidate(parent, goal.id, GOAL_IN_PNODE))
                    seen_pairs.add(pair)
        return out

    def eval_prospection(self) -> int:
        """1 iff a sub-goal candidate is currently found, else 0."""
        if not self.prospection_enabled:
            return 0
        return 1 if self.find_subgoal_candidates() else 0

    def link_subgoal(self, candidate: SubgoalCandidate) -> GoalLink | LinkRejection:
        """Make a latent containment relation explicit as a goal link."""
        result = self.ltm.add_goal_link(candidate.parent, candidate.child, "bottomup")
        if isinstance(result, LinkRejection):
            self._link_blacklist.add((candidate.parent, candidate.child))
        return result
