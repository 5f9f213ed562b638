"""Long-term memory: a typed directed graph of drives' targets and know-how.

Node kinds: world models, goals, P-nodes (precondition classes), C-nodes
(product-type context units binding world model x goal x P-node to a policy)
and policies.  Goals form a second, acyclic layer of parent->child sub-goal
links along which activation cascades with attenuation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .percept import Percept
from .regions import Region

ATTENUATION = 0.8
EPSILON_EXPLORE = 0.05
# Policies within this relative band of the maximum activation are treated
# as tied: the learned activations cannot meaningfully separate them yet.
# Must stay below 1 - ATTENUATION so sub-goal levels remain decisive.
SELECTION_TOLERANCE = 0.05

ENVIRONMENT_POLICIES = (
    "pick_fruit",
    "test_fruit",
    "accept_fruit",
    "discard_fruit",
    "change_hands",
    "place_fruit",
    "ask_nicely",
    "press_button",
)

PROVENANCES = ("extrinsic", "effect", "topdown", "cognitive")

DOT_FILL = {
    "effect": "lightblue",
    "topdown": "red",
    "extrinsic": "white",
    "cognitive": "lightgray",
}


class DanglingReferenceError(KeyError):
    """A node id referenced by an edge or C-node does not exist."""


class DuplicateContextError(ValueError):
    """A (world model, goal, policy) triple is already bound to a C-node."""


@dataclass(frozen=True)
class RewardPredicate:
    """What grants this goal its reward.

    kind "drive":  an extrinsic reward channel name (e.g. "d_classify").
    kind "sensor": a rising edge on the given binary percept component.
    kind "pnode":  the referenced P-node's region activates on the current
                   percept.
    """

    kind: str
    target: str | int


@dataclass
class WorldModelNode:
    id: str
    name: str
    activation: float = 1.0


@dataclass
class PolicyNode:
    id: str
    name: str
    environment: bool = True
    activation: float = 0.0


@dataclass
class GoalNode:
    id: str
    name: str
    provenance: str
    region: Optional[Region] = None
    reward_predicate: Optional[RewardPredicate] = None
    activation: float = 0.0
    drive_activation: float = 0.0
    # Effect goals stay pursued until learned, then this latches off.
    drive_active: bool = True


@dataclass
class PNode:
    id: str
    name: str
    region: Region
    consumed_by_topdown: bool = False


@dataclass
class CNode:
    id: str
    wm: str
    goal: str
    pnode: str
    policy: str
    activation: float = 0.0


@dataclass(frozen=True)
class GoalLink:
    parent: str
    child: str
    attenuation: float
    origin: str  # "topdown" | "bottomup"


@dataclass(frozen=True)
class LinkRejection:
    parent: str
    child: str
    reason: str  # "cycle" | "duplicate"


class LTM:
    """Single-writer long-term memory for one run."""

    def __init__(self):
        self.world_models: dict[str, WorldModelNode] = {}
        self.goals: dict[str, GoalNode] = {}
        self.pnodes: dict[str, PNode] = {}
        self.cnodes: dict[str, CNode] = {}
        self.policies: dict[str, PolicyNode] = {}
        self.links: list[GoalLink] = []
        self._link_pairs: set[tuple[str, str]] = set()
        self._contexts: dict[tuple[str, str, str], str] = {}
        self._children: dict[str, list[GoalLink]] = {}
        self._parents: dict[str, list[GoalLink]] = {}
        self._counters = {"WM": 0, "G": 0, "P": 0, "C": 0, "PI": 0}

    def _next_id(self, kind: str) -> str:
        self._counters[kind] += 1
        return f"{kind}{self._counters[kind]}"

    # -- node insertion ----------------------------------------------------

    def add_world_model(self, name: str) -> WorldModelNode:
        node = WorldModelNode(self._next_id("WM"), name)
        self.world_models[node.id] = node
        return node

    def add_policy(self, name: str, environment: bool = True) -> PolicyNode:
        node = PolicyNode(self._next_id("PI"), name, environment)
        self.policies[node.id] = node
        return node

    def add_goal(self, name: str, provenance: str, region: Region | None,
                 reward_predicate: RewardPredicate | None) -> GoalNode:
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        node = GoalNode(self._next_id("G"), name, provenance, region, reward_predicate)
        if region is not None:
            region.node_id = node.id
        self.goals[node.id] = node
        return node

    def add_pnode(self, name: str, region: Region) -> PNode:
        node = PNode(self._next_id("P"), name, region)
        region.node_id = node.id
        self.pnodes[node.id] = node
        return node

    def add_cnode(self, wm: str, goal: str, pnode: str, policy: str) -> CNode:
        for ref, table in ((wm, self.world_models), (goal, self.goals),
                           (pnode, self.pnodes), (policy, self.policies)):
            if ref not in table:
                raise DanglingReferenceError(ref)
        context = (wm, goal, policy)
        if context in self._contexts:
            raise DuplicateContextError(f"context {context} already bound")
        node = CNode(self._next_id("C"), wm, goal, pnode, policy)
        self.cnodes[node.id] = node
        self._contexts[context] = node.id
        return node

    def cnode_for_context(self, wm: str, goal: str, policy: str) -> CNode | None:
        cid = self._contexts.get((wm, goal, policy))
        return self.cnodes[cid] if cid else None

    def policy_by_name(self, name: str) -> PolicyNode:
        for node in self.policies.values():
            if node.name == name:
                return node
        raise DanglingReferenceError(name)

    # -- goal links ----------------------------------------------------------

    def would_create_cycle(self, parent: str, child: str) -> bool:
        """True iff parent is reachable from child (adding the link loops)."""
        if parent == child:
            return True
        stack = [child]
        seen = {child}
        while stack:
            for link in self._children.get(stack.pop(), ()):
                if link.child == parent:
                    return True
                if link.child not in seen:
                    seen.add(link.child)
                    stack.append(link.child)
        return False

    def add_goal_link(self, parent: str, child: str, origin: str,
                      attenuation: float = ATTENUATION) -> GoalLink | LinkRejection:
        if parent not in self.goals or child not in self.goals:
            raise DanglingReferenceError(f"{parent} or {child}")
        if (parent, child) in self._link_pairs:
            return LinkRejection(parent, child, "duplicate")
        if self.would_create_cycle(parent, child):
            return LinkRejection(parent, child, "cycle")
        link = GoalLink(parent, child, attenuation, origin)
        self.links.append(link)
        self._link_pairs.add((parent, child))
        self._children.setdefault(parent, []).append(link)
        self._parents.setdefault(child, []).append(link)
        return link

    def descendants(self, goal_id: str) -> set[str]:
        out: set[str] = set()
        stack = [goal_id]
        while stack:
            for link in self._children.get(stack.pop(), ()):
                if link.child not in out:
                    out.add(link.child)
                    stack.append(link.child)
        return out

    # -- activation ----------------------------------------------------------

    def cascade_goal_activation(self, satisfied: frozenset[str] | set[str] = frozenset()) -> None:
        """Combine drive-assigned and cascaded activation over the link DAG.

        Each goal's activation is the max of its own drive-assigned value and
        every incoming parent activation attenuated by the link factor;
        computed in topological order so chains settle in one pass.  Goals in
        ``satisfied`` (already achieved this trial) stay at zero and stop the
        cascade into their subtrees.
        """
        indegree = {gid: len(self._parents.get(gid, ())) for gid in self.goals}
        order = [gid for gid, d in indegree.items() if d == 0]
        queue = list(order)
        while queue:
            gid = queue.pop()
            for link in self._children.get(gid, ()):
                indegree[link.child] -= 1
                if indegree[link.child] == 0:
                    order.append(link.child)
                    queue.append(link.child)
        for gid in order:
            goal = self.goals[gid]
            if gid in satisfied:
                goal.activation = 0.0
                continue
            act = goal.drive_activation
            for link in self._parents.get(gid, ()):
                act = max(act, self.goals[link.parent].activation * link.attenuation)
            goal.activation = act

    def cnode_activation(self, cnode: CNode, percept: Percept) -> float:
        """Product-type unit: wm x goal x P-node region activation."""
        wm = self.world_models[cnode.wm].activation
        goal = self.goals[cnode.goal].activation
        if wm == 0.0 or goal == 0.0:
            return 0.0
        return wm * goal * self.pnodes[cnode.pnode].region.predict(percept)

    def propagate_and_select(
        self,
        percept: Percept,
        rng: np.random.Generator,
        epsilon: float = EPSILON_EXPLORE,
        suppressed: set[str] | frozenset[str] = frozenset(),
    ) -> tuple[PolicyNode, CNode | None]:
        """Compute C-node products, pick the most active policy.

        Each policy's activation is the max over its C-nodes.  Ties break
        uniformly at random; if nothing reaches ``epsilon`` a random
        environment policy is selected (novelty-driven exploration) and no
        C-node is credited with the choice.  C-nodes in ``suppressed`` (their
        policy just no-opped in this very percept) are left out of the
        competition.
        """
        for policy in self.policies.values():
            policy.activation = 0.0
        best_cnode: dict[str, CNode] = {}
        for cnode in self.cnodes.values():
            cnode.activation = self.cnode_activation(cnode, percept)
            if cnode.id in suppressed:
                continue
            policy = self.policies[cnode.policy]
            if cnode.activation > policy.activation:
                policy.activation = cnode.activation
                best_cnode[cnode.policy] = cnode
        max_act = max((p.activation for p in self.policies.values()), default=0.0)
        if max_act < epsilon:
            env = sorted(
                (p for p in self.policies.values() if p.environment),
                key=lambda p: p.id,
            )
            return env[rng.integers(0, len(env))], None
        tied = sorted(
            (p for p in self.policies.values()
             if p.activation >= max_act * (1.0 - SELECTION_TOLERANCE)),
            key=lambda p: p.id,
        )
        chosen = tied[0] if len(tied) == 1 else tied[rng.integers(0, len(tied))]
        return chosen, best_cnode[chosen.id]

    # -- export ----------------------------------------------------------------

    def graph_document(self) -> dict:
        """Full node/edge listing with provenance, confidences, link origins."""
        nodes = []
        for wm in self.world_models.values():
            nodes.append({"id": wm.id, "kind": "world_model", "name": wm.name,
                          "provenance": None, "confidence": None})
        for g in self.goals.values():
            nodes.append({
                "id": g.id, "kind": "goal", "name": g.name,
                "provenance": g.provenance,
                "confidence": g.region.tracker.confidence if g.region else None,
            })
        for p in self.pnodes.values():
            nodes.append({
                "id": p.id, "kind": "pnode", "name": p.name,
                "provenance": None,
                "confidence": p.region.tracker.confidence,
            })
        for pi in self.policies.values():
            nodes.append({"id": pi.id, "kind": "policy", "name": pi.name,
                          "provenance": None, "confidence": None})
        return {
            "nodes": nodes,
            "links": [
                {"parent": l.parent, "child": l.child,
                 "origin": l.origin, "attenuation": l.attenuation}
                for l in self.links
            ],
            "cnodes": [
                {"wm": c.wm, "goal": c.goal, "pnode": c.pnode, "policy": c.policy}
                for c in self.cnodes.values()
            ],
        }

    def export_graph(self, format: str) -> str:
        if format == "json":
            return dump_graph_json(self.graph_document())
        if format == "dot":
            return self._export_dot()
        raise ValueError(f"unknown export format {format!r}")

    def _export_dot(self) -> str:
        lines = ["digraph goals {", "  rankdir=TB;"]
        for g in self.goals.values():
            fill = DOT_FILL[g.provenance]
            label = f"{g.id}\\n{g.name}"
            lines.append(
                f'  "{g.id}" [label="{label}", style=filled, fillcolor={fill}];'
            )
        for link in self.links:
            style = 'color=blue' if link.origin == "bottomup" else 'color=black'
            lines.append(f'  "{link.parent}" -> "{link.child}" [{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def dump_graph_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=1) + "\n"


def load_graph_json(text: str) -> dict:
    return json.loads(text)
