"""Loop shortcutting: observe which outports a flow uses, truncate suffixes.

Each node watches its own traffic. When a flow leaves a node through an
outport that is not the effective top of some inport's suffix, that inport
deletes every higher-priority entry, making the observed outport its new top
choice. Outports whose link is down count as already removed, so a rule
whose top entry merely failed over is not rewritten. The whole mechanism is
local: a node's update depends only on the hops that touched it.

Iterating route -> observe -> truncate reaches a fixpoint; under a single
link failure one round suffices and the final route is a loop-free sub-path
of the original reroute walk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .forwarding import (
    MODE_GREEDY,
    MODE_SUFFIX,
    ForwardingState,
    Outcome,
    Trace,
    route,
)
from .topology import FailureSet, Flow, Topology, canon_link


@dataclass
class NodeObservation:
    """What one node saw of a trace: inports entered and outports taken.

    Exit indices are node-level knowledge; every inport the packet used
    compares its own suffix against all of them. Inports the packet never
    used keep their rules: they would adapt the moment they see traffic,
    and leaving them put is what keeps a loop-free failover from counting
    as a truncating round. A None exit index marks a greedy return edge
    that is not in the node's distance-ordered list.
    """

    inports: set[str | None] = field(default_factory=set)
    exits: set[tuple[str, int | None]] = field(default_factory=set)


Observations = dict[str, NodeObservation]


@dataclass(frozen=True)
class RuleChange:
    """One audit record: an inport's suffix start moved (or a pin was set)."""

    node: str
    inport: str | None
    kind: str = "truncate"  # "truncate" | "pin"
    old_start: int | None = None
    new_start: int | None = None
    outport: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "node": self.node,
            "inport": self.inport if self.inport is not None else "",
            "kind": self.kind,
            "old_start": self.old_start,
            "new_start": self.new_start,
            "outport": self.outport,
        }


def observations_from_trace(
    state: ForwardingState,
    topology: Topology,
    failures: FailureSet,
    trace: Trace,
) -> Observations:
    """Replay the trace against the state to recover used priority indices.

    The trace must have been produced by ``route`` on this very state under
    the same failures; any divergence is an error.
    """
    if trace.flow_id != state.flow.flow_id:
        raise ValueError(f"trace flow {trace.flow_id!r} unknown to this state")
    dead_links = failures.dead_links(topology)

    def dead(u: str, v: str) -> bool:
        return canon_link(u, v) in dead_links

    obs: Observations = {}
    for hop in trace.hops:
        if hop.node not in state.tables:
            raise ValueError(f"trace references unknown node {hop.node!r}")
        sel = state.select(hop.node, hop.inport, dead)
        if sel is None or sel[0] != hop.outport:
            raise ValueError(
                f"trace hop at {hop.node!r} does not replay against this state"
            )
        node_obs = obs.setdefault(hop.node, NodeObservation())
        node_obs.inports.add(hop.inport)
        node_obs.exits.add(sel)
    return obs


def _first_live(
    table, node: str, dead, start: int, tag: int | None = None
) -> int | None:
    """Effective top of a suffix: first live entry at or after ``start``.

    With ``tag`` given, only entries of that partition are considered (the
    per-partition reading of "failed outports count as removed").
    """
    prio = table.priority
    for idx in range(start, len(prio) + 1):
        if tag is not None and table.partition_tag[idx - 1] != tag:
            continue
        if not dead(node, prio[idx - 1]):
            return idx
    return None


def apply_truncation(
    state: ForwardingState,
    topology: Topology,
    failures: FailureSet,
    observations: Observations,
    partition_scoped: bool = False,
) -> list[RuleChange]:
    """Advance inport suffix starts to the lowest-priority observed outport.

    For every observed node and every one of its inports (used by the packet
    or not): find the largest observed index inside the inport's current
    suffix; if it lies beyond the suffix's first *live* entry, move the start
    there. With ``partition_scoped``, comparisons stay within one partition
    tag, and an observed outport of a later partition pulls all
    earlier-partition inports directly to it.
    """
    dead_links = failures.dead_links(topology)

    def dead(u: str, v: str) -> bool:
        return canon_link(u, v) in dead_links

    changes: list[RuleChange] = []
    for node in sorted(observations):
        table = state.tables[node]
        k = len(table.priority)
        node_obs = observations[node]
        indexed = sorted(idx for (_, idx) in node_obs.exits if idx is not None)
        if not indexed:
            continue
        for inport in sorted(
            node_obs.inports, key=lambda p: ("", "") if p is None else ("x", p)
        ):
            if inport not in table.inport_start:
                continue
            j = table.inport_start[inport]
            if j > k:
                continue
            if partition_scoped:
                tag = table.partition_tag[j - 1]
                same = [
                    i for i in indexed if i >= j and table.partition_tag[i - 1] == tag
                ]
                new_j = j
                if same:
                    top = _first_live(table, node, dead, j, tag=tag)
                    if top is not None and max(same) > top:
                        new_j = max(same)
                later = [i for i in indexed if table.partition_tag[i - 1] > tag]
                if later:
                    new_j = max(new_j, max(later))
            else:
                within = [i for i in indexed if i >= j]
                new_j = j
                if within:
                    top = _first_live(table, node, dead, j)
                    if top is not None and max(within) > top:
                        new_j = max(within)
            if new_j != j:
                table.inport_start[inport] = new_j
                changes.append(
                    RuleChange(node=node, inport=inport, old_start=j, new_start=new_j)
                )
    return changes


def observe_and_truncate(
    state: ForwardingState,
    topology: Topology,
    failures: FailureSet,
    trace: Trace,
) -> list[RuleChange]:
    """Standard suffix truncation from one probe trace (mutates the state)."""
    if state.mode != MODE_SUFFIX:
        raise ValueError("suffix-mode state required")
    obs = observations_from_trace(state, topology, failures, trace)
    return apply_truncation(state, topology, failures, obs)


def partition_shortcut(
    state: ForwardingState,
    topology: Topology,
    failures: FailureSet,
    trace: Trace,
) -> list[RuleChange]:
    """Partition-scoped truncation plus the ordered cross-partition jump."""
    if state.mode != MODE_SUFFIX or not state.is_partition_tagged():
        raise ValueError("partition-tagged state required")
    obs = observations_from_trace(state, topology, failures, trace)
    return apply_truncation(state, topology, failures, obs, partition_scoped=True)


def greedy_shortcut(
    state: ForwardingState,
    topology: Topology,
    failures: FailureSet,
    trace: Trace,
) -> list[RuleChange]:
    """Greedy adaptation: pin observed bounce-backs, truncate the global order.

    A local pattern v1 -> v2 -> v1 means bouncing back was v2's best greedy
    choice, so v2 pins "to v1" as the top outport for the inport from v1.
    Nodes additionally apply the standard truncation to their global
    distance order.
    """
    if state.mode != MODE_GREEDY:
        raise ValueError("greedy-mode state required")
    obs = observations_from_trace(state, topology, failures, trace)
    changes: list[RuleChange] = []
    for prev, hop in zip(trace.hops, trace.hops[1:]):
        if hop.inport == prev.node and hop.outport == prev.node:
            table = state.tables[hop.node]
            if hop.inport not in table.pinned:
                table.pinned.add(hop.inport)
                changes.append(
                    RuleChange(
                        node=hop.node, inport=hop.inport, kind="pin", outport=hop.outport
                    )
                )
    changes.extend(apply_truncation(state, topology, failures, obs))
    return changes


@dataclass
class FixpointResult:
    """All traces of a route/observe/truncate iteration, plus round count."""

    traces: list[Trace]
    rounds: int
    changes_per_round: list[list[RuleChange]] = field(default_factory=list)

    @property
    def initial_trace(self) -> Trace:
        return self.traces[0]

    @property
    def final_trace(self) -> Trace:
        return self.traces[-1]

    @property
    def delivered(self) -> bool:
        return self.final_trace.outcome is Outcome.DELIVERED

    def all_changes(self) -> list[RuleChange]:
        return [c for rnd in self.changes_per_round for c in rnd]


def shortcut_fixpoint(
    state: ForwardingState,
    topology: Topology,
    failures: FailureSet,
    flow: Flow,
) -> FixpointResult:
    """Alternate route and truncate until no rule changes (mutates state).

    A non-delivered trace at any round is surfaced as the final verdict, not
    raised. Suffix starts only ever grow, so the iteration terminates within
    the total number of priority entries.
    """
    if state.mode == MODE_GREEDY:
        step = greedy_shortcut
    elif state.is_partition_tagged():
        step = partition_shortcut
    else:
        step = observe_and_truncate
    bound = sum(len(t.priority) + 1 for t in state.tables.values()) + 1

    traces = [route(state, topology, failures, flow)]
    result = FixpointResult(traces=traces, rounds=0)
    while traces[-1].outcome is Outcome.DELIVERED:
        changes = step(state, topology, failures, traces[-1])
        if not changes:
            break
        result.rounds += 1
        result.changes_per_round.append(changes)
        if result.rounds > bound:
            raise RuntimeError("shortcut iteration failed to reach a fixpoint")
        traces.append(route(state, topology, failures, flow))
    return result
