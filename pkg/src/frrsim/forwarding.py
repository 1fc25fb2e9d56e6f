"""Deterministic inport-aware forwarding: trace the walk a packet takes.

A node forwards per flow from an ordered priority list of outports. Each
inport maps to a start index into that list; forwarding takes the first
entry at or after the start whose link is up. Only failures incident to the
current node are ever consulted, so every decision is local.

Two lookup modes exist:
  * ``suffix``  -- the inport selects a contiguous tail of the priority list
                   (arborescence and partition failover compile to this);
  * ``greedy``  -- one global distance-ordered list per node; the outport
                   back through the packet's inport is demoted to last (or
                   pinned first, once a bounce-back was observed).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .topology import FailureSet, Flow, Topology, canon_link

MODE_SUFFIX = "suffix"
MODE_GREEDY = "greedy"

INJECT = None  # virtual injection inport of a freshly emitted packet
_INJECT_JSON = ""  # JSON key standing in for the injection inport


class Outcome(str, Enum):
    DELIVERED = "delivered"
    DROPPED = "dropped"
    LOOP = "loop"


@dataclass(frozen=True)
class Hop:
    node: str
    inport: str | None
    outport: str


@dataclass(frozen=True)
class Trace:
    """The walk a probe packet took, plus its terminal outcome."""

    flow_id: str
    hops: tuple[Hop, ...]
    outcome: Outcome
    final_node: str
    loop_inport: str | None = None

    @property
    def hop_count(self) -> int:
        return len(self.hops)

    def node_path(self) -> tuple[str, ...]:
        if not self.hops:
            return (self.final_node,)
        return (self.hops[0].node,) + tuple(h.outport for h in self.hops)

    def path_string(self) -> str:
        return "-".join(self.node_path())

    def directed_edges(self) -> list[tuple[str, str]]:
        return [(h.node, h.outport) for h in self.hops]

    def is_simple(self) -> bool:
        path = self.node_path()
        return len(path) == len(set(path))

    def to_json_dict(self) -> dict:
        return {
            "flow": self.flow_id,
            "outcome": self.outcome.value,
            "final_node": self.final_node,
            "loop_inport": self.loop_inport,
            "node_path": self.path_string(),
            "hops": [
                [h.node, h.inport if h.inport is not None else _INJECT_JSON, h.outport]
                for h in self.hops
            ],
        }


class PortTable:
    """Per (node, flow) forwarding rules."""

    __slots__ = ("priority", "inport_start", "partition_tag", "pinned")

    def __init__(
        self,
        priority: list[str],
        inport_start: dict[str | None, int],
        partition_tag: list[int] | None = None,
        pinned: set[str] | None = None,
    ):
        self.priority = list(priority)
        self.inport_start = dict(inport_start)
        self.partition_tag = list(partition_tag) if partition_tag is not None else None
        self.pinned = set(pinned) if pinned else set()
        if self.partition_tag is not None and len(self.partition_tag) != len(self.priority):
            raise ValueError("partition_tag must parallel the priority list")
        k = len(self.priority)
        for inport, j in self.inport_start.items():
            if not 1 <= j <= k + 1:
                raise ValueError(f"inport {inport!r} start {j} out of range 1..{k + 1}")

    def start(self, inport: str | None) -> int:
        return self.inport_start.get(inport, 1)

    def copy(self) -> "PortTable":
        return PortTable(self.priority, self.inport_start, self.partition_tag, self.pinned)

    def to_json_dict(self) -> dict:
        starts = {
            (_INJECT_JSON if k is None else k): v
            for k, v in self.inport_start.items()
        }
        return {
            "priority": list(self.priority),
            "inport_start": {k: starts[k] for k in sorted(starts)},
            "partition_tag": list(self.partition_tag) if self.partition_tag else None,
            "pinned": sorted(self.pinned),
        }


class ForwardingState:
    """All per-node rules of one flow; the mutable object shortcutting edits.

    Mutation happens only between routing passes. Concurrent evaluations must
    work on independent copies (see ``copy``).
    """

    def __init__(self, flow: Flow, mode: str, tables: dict[str, PortTable]):
        if mode not in (MODE_SUFFIX, MODE_GREEDY):
            raise ValueError(f"unknown forwarding mode {mode!r}")
        self.flow = flow
        self.mode = mode
        self.tables = tables

    def copy(self) -> "ForwardingState":
        return ForwardingState(
            self.flow, self.mode, {n: t.copy() for n, t in self.tables.items()}
        )

    def is_partition_tagged(self) -> bool:
        return self.mode == MODE_SUFFIX and any(
            t.partition_tag is not None for t in self.tables.values()
        )

    def select(
        self, node: str, inport: str | None, dead: Callable[[str, str], bool]
    ) -> tuple[str, int | None] | None:
        """First viable outport for a packet at ``node`` via ``inport``.

        Returns (outport, priority index) or None when the rule set offers no
        live outport. The index is None only for a greedy return edge that is
        not part of the node's distance-ordered list.
        """
        tab = self.tables[node]
        prio = tab.priority
        j = tab.start(inport)
        if self.mode == MODE_SUFFIX:
            for idx in range(j, len(prio) + 1):
                out = prio[idx - 1]
                if not dead(node, out):
                    return out, idx
            return None
        # Greedy: demote (or pin) the return edge, which is viable even when
        # it is not in the distance-ordered list.
        suffix = [(idx, prio[idx - 1]) for idx in range(j, len(prio) + 1)]
        ordered: list[tuple[int | None, str]] = []
        if inport is not None and inport in tab.pinned:
            ordered.append((self._index_of(prio, inport), inport))
            ordered.extend((idx, out) for idx, out in suffix if out != inport)
        else:
            ordered.extend((idx, out) for idx, out in suffix if out != inport)
            if inport is not None:
                ordered.append((self._index_of(prio, inport), inport))
        for idx, out in ordered:
            if not dead(node, out):
                return out, idx
        return None

    @staticmethod
    def _index_of(prio: list[str], out: str) -> int | None:
        try:
            return prio.index(out) + 1
        except ValueError:
            return None

    def to_json_dict(self) -> dict:
        return {
            "flow": self.flow.flow_id,
            "source": self.flow.source,
            "destination": self.flow.destination,
            "mode": self.mode,
            "tables": {n: self.tables[n].to_json_dict() for n in sorted(self.tables)},
        }


def route(
    state: ForwardingState,
    topology: Topology,
    failures: FailureSet,
    flow: Flow,
    start: str | None = None,
) -> Trace:
    """Walk a probe packet from ``start`` (default: the flow source).

    Stops on reaching the destination (Delivered), on an empty viable suffix
    (Dropped), or on the first repeated (node, inport) pair, which under
    deterministic forwarding proves an infinite loop. A hop cap of m+1 backs
    the loop detector up; with sane state it is unreachable.
    """
    if flow.flow_id != state.flow.flow_id or (flow.source, flow.destination) != (
        state.flow.source,
        state.flow.destination,
    ):
        raise ValueError(f"flow {flow.flow_id!r} unknown to this forwarding state")
    if start is None:
        start = flow.source
    if not topology.has_node(start):
        raise ValueError(f"start node {start!r} not in topology")
    if start in failures.failed_nodes:
        raise ValueError(f"start node {start!r} is failed")

    dead_links = failures.dead_links(topology)

    def dead(u: str, v: str) -> bool:
        return canon_link(u, v) in dead_links

    v: str = start
    inport: str | None = INJECT
    hops: list[Hop] = []
    seen: set[tuple[str, str | None]] = set()
    cap = topology.m + 1
    while v != flow.destination:
        key = (v, inport)
        if key in seen:
            return Trace(flow.flow_id, tuple(hops), Outcome.LOOP, v, loop_inport=inport)
        seen.add(key)
        if v not in state.tables:
            raise ValueError(f"node {v!r} has no forwarding rules for {flow.flow_id!r}")
        sel = state.select(v, inport, dead)
        if sel is None:
            return Trace(flow.flow_id, tuple(hops), Outcome.DROPPED, v)
        out, _ = sel
        hops.append(Hop(v, inport, out))
        if len(hops) > cap:
            raise RuntimeError("hop cap exceeded; forwarding state is inconsistent")
        v, inport = out, v
    return Trace(flow.flow_id, tuple(hops), Outcome.DELIVERED, v)


@dataclass(frozen=True)
class TraceStats:
    hop_count: int
    visits_per_node: dict[str, int] = field(compare=False)
    looped_nodes: frozenset[str] = frozenset()
    directed_edges_used: frozenset[tuple[str, str]] = frozenset()


def trace_stats(trace: Trace) -> TraceStats:
    """Visit counts, looped nodes, and the set of directed edges used."""
    visits = Counter(trace.node_path())
    return TraceStats(
        hop_count=trace.hop_count,
        visits_per_node=dict(visits),
        looped_nodes=frozenset(n for n, c in visits.items() if c >= 2),
        directed_edges_used=frozenset(trace.directed_edges()),
    )
