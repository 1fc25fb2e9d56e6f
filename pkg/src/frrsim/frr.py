"""Fast-reroute scheme construction and compilation into forwarding state.

Three schemes are supported:

* ``arborescence`` -- k arc-disjoint spanning arborescences rooted at the
  flow destination; routing walks arborescence 1 and each failure hit
  advances to the next one, encoded purely as inport suffix starts.
* ``partition`` -- k edge-disjoint source-destination paths; a failure on
  path i bounces the packet back along the path, and the divergence point
  emits it on path i+1.
* ``greedy`` -- per node, outports ordered by residual distance to the
  destination; the return edge through the packet's inport is the demoted
  last resort.

Disjointness of arborescences is at the directed-arc level: two
arborescences may use one physical link in opposite orientations, but never
the same directed edge. That is what a k-edge-connected graph can actually
pack for k = edge connectivity, and a single link failure then kills at
most one priority entry per node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .forwarding import MODE_GREEDY, MODE_SUFFIX, ForwardingState, PortTable
from .topology import (
    Flow,
    Topology,
    bfs_distances,
    canon_link,
    edge_connectivity,
    unit_max_flow,
)


class DecompositionError(RuntimeError):
    """Requested packing could not be built; never a silent partial result."""


@dataclass(frozen=True)
class Arborescence:
    """Directed spanning tree oriented toward its root (the flow destination)."""

    root: str
    parent: Mapping[str, str]

    def arcs(self) -> set[tuple[str, str]]:
        return {(v, p) for v, p in self.parent.items()}

    def path_to_root(self, v: str) -> list[str]:
        path = [v]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
            if len(path) > len(self.parent) + 1:
                raise DecompositionError("parent map contains a cycle")
        return path

    def validate(self, topology: Topology) -> None:
        expected = set(topology.nodes) - {self.root}
        if set(self.parent) != expected:
            raise DecompositionError("arborescence does not span all nodes")
        for v, p in self.parent.items():
            if not topology.has_link(v, p):
                raise DecompositionError(f"arc ({v}, {p}) is not a topology link")
        for v in self.parent:
            self.path_to_root(v)


def validate_disjoint(arborescences: Sequence[Arborescence], topology: Topology) -> None:
    """Check spanning-ness, rootedness, and pairwise arc-disjointness."""
    if not arborescences:
        raise DecompositionError("empty arborescence list")
    root = arborescences[0].root
    used: set[tuple[str, str]] = set()
    for arb in arborescences:
        if arb.root != root:
            raise DecompositionError("arborescences have differing roots")
        arb.validate(topology)
        arcs = arb.arcs()
        clash = used & arcs
        if clash:
            raise DecompositionError(f"directed edge reused across arborescences: {sorted(clash)}")
        used |= arcs


def _reachable(adj: Mapping[str, set[str]], source: str) -> set[str]:
    seen = {source}
    stack = [source]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def _adj_of(arcs: Iterable[tuple[str, str]]) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for u, v in arcs:
        adj.setdefault(u, set()).add(v)
    return adj


def _arc_safe(
    nodes: Sequence[str],
    residual_arcs: set[tuple[str, str]],
    root: str,
    need: int,
) -> bool:
    """True if every node still has ``need`` arc-disjoint paths from root."""
    adj = _adj_of(residual_arcs)
    if len(_reachable(adj, root)) < len(nodes):
        return False
    if need <= 1:
        return True
    for x in nodes:
        if x == root:
            continue
        if unit_max_flow(adj, root, x, limit=need) < need:
            return False
    return True


def _grow_out_tree(
    topology: Topology, avail: set[tuple[str, str]], root: str, need: int
) -> set[tuple[str, str]]:
    """Grow one spanning out-tree from root, keeping ``need`` packings possible.

    Arcs are committed only when the residual arc set retains ``need``
    arc-disjoint root-to-x paths for every node x, which guarantees the
    remaining arborescences can still be extracted. A safe arc always exists
    while the packing bound holds, so the loop cannot stall.
    """
    nodes = topology.nodes
    spanned = {root}
    depth = {root: 0}
    tree: set[tuple[str, str]] = set()
    while len(spanned) < len(nodes):
        candidates = sorted(
            ((u, v) for (u, v) in avail if u in spanned and v not in spanned),
            key=lambda a: (depth[a[0]], a[0], a[1]),
        )
        for u, v in candidates:
            if need == 0 or _arc_safe(nodes, avail - tree - {(u, v)}, root, need):
                tree.add((u, v))
                spanned.add(v)
                depth[v] = depth[u] + 1
                break
        else:
            raise DecompositionError(
                f"no extendable arc while packing arborescences at root {root!r}"
            )
    return tree


def decompose_arborescences(topology: Topology, root: str, k: int) -> list[Arborescence]:
    """k pairwise arc-disjoint spanning arborescences oriented toward root.

    Requires k <= edge_connectivity(topology). The result is validated
    (spanning, rooted, disjoint) before being returned.
    """
    if not topology.has_node(root):
        raise ValueError(f"root {root!r} not in topology")
    if k < 1:
        raise ValueError("k must be >= 1")
    lam = edge_connectivity(topology)
    if k > lam:
        raise ValueError(f"k={k} exceeds edge connectivity {lam}")
    avail = {(u, v) for u in topology.nodes for v in topology.neighbors(u)}
    arbs: list[Arborescence] = []
    for i in range(1, k + 1):
        tree = _grow_out_tree(topology, avail, root, need=k - i)
        avail -= tree
        # Out-tree arcs point away from the root; reverse into parent pointers.
        arbs.append(Arborescence(root=root, parent={v: u for (u, v) in tree}))
    validate_disjoint(arbs, topology)
    return arbs


def compile_arborescence_frr(
    topology: Topology, arborescences: Sequence[Arborescence], flow: Flow
) -> ForwardingState:
    """Compile arborescence failover into inport-aware suffix rules.

    At every node the priority list is [arb-1 parent edge, arb-2 parent
    edge, ...]; an inport arriving on arborescence i starts its suffix at
    index i, and inports on no arborescence (including injection) start at 1.
    """
    if not arborescences:
        raise ValueError("need at least one arborescence")
    root = flow.destination
    for arb in arborescences:
        if arb.root != root:
            raise ValueError("arborescences must be rooted at the flow destination")
    flow.validate(topology)
    tables: dict[str, PortTable] = {}
    for v in topology.nodes:
        if v == root:
            tables[v] = PortTable([], {None: 1})
            continue
        priority = []
        for arb in arborescences:
            if v not in arb.parent:
                raise ValueError(f"node {v!r} not spanned by an arborescence")
            priority.append(arb.parent[v])
        starts: dict[str | None, int] = {None: 1}
        for u in topology.neighbors(v):
            j = 1
            for i, arb in enumerate(arborescences, start=1):
                if arb.parent.get(u) == v:
                    j = i
                    break
            starts[u] = j
        tables[v] = PortTable(priority, starts)
    return ForwardingState(flow, MODE_SUFFIX, tables)


# ---------------------------------------------------------------------------
# Edge-disjoint path partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionScheme:
    """Ordered edge-disjoint source->destination paths; P1 is the default route.

    ``relaxed`` admits paths that share a common prefix and/or suffix while
    their middles stay edge-disjoint (the bundled figure1 scenario needs
    this: both routes use the S-S1 and S4-D stubs).
    """

    flow: Flow
    paths: tuple[tuple[str, ...], ...]
    relaxed: bool = False

    def validate(self, topology: Topology) -> None:
        if not self.paths:
            raise ValueError("partition scheme needs at least one path")
        for path in self.paths:
            if len(path) < 2:
                raise ValueError(f"path too short: {path}")
            if path[0] != self.flow.source or path[-1] != self.flow.destination:
                raise ValueError(f"path {path} does not join the flow endpoints")
            if len(set(path)) != len(path):
                raise ValueError(f"path {path} is not simple")
            for a, b in zip(path, path[1:]):
                if not topology.has_link(a, b):
                    raise ValueError(f"path step ({a}, {b}) is not a link")
        for i in range(len(self.paths)):
            for j in range(i + 1, len(self.paths)):
                self._check_pair(self.paths[i], self.paths[j])

    def _check_pair(self, pa: tuple[str, ...], pb: tuple[str, ...]) -> None:
        edges_a = {canon_link(x, y) for x, y in zip(pa, pa[1:])}
        edges_b = {canon_link(x, y) for x, y in zip(pb, pb[1:])}
        shared = edges_a & edges_b
        if not shared:
            return
        if not self.relaxed:
            raise ValueError(f"paths share links {sorted(shared)}")
        q = 0
        while q < min(len(pa), len(pb)) and pa[q] == pb[q]:
            q += 1
        r = 0
        while r < min(len(pa), len(pb)) and pa[-1 - r] == pb[-1 - r]:
            r += 1
        allowed = {canon_link(x, y) for x, y in zip(pa[:q], pa[1:q])}
        allowed |= {canon_link(x, y) for x, y in zip(pa[len(pa) - r :], pa[len(pa) - r + 1 :])}
        if not shared <= allowed:
            raise ValueError(
                f"paths share mid-route links {sorted(shared - allowed)}; "
                "only a common prefix/suffix is allowed"
            )


def compute_disjoint_paths(topology: Topology, flow: Flow, k: int) -> PartitionScheme:
    """Extract k pairwise edge-disjoint paths via max-flow decomposition.

    Paths are ordered by (length, node sequence), so P1 is a shortest
    extracted path with lexicographic tie-breaking.
    """
    flow.validate(topology)
    if k < 1:
        raise ValueError("k must be >= 1")
    adj = topology.arc_adjacency()
    value, flow_arcs = unit_max_flow(
        adj, flow.source, flow.destination, return_flow=True
    )
    if k > value:
        raise ValueError(f"k={k} exceeds max-flow value {value}")
    succ = _adj_of(flow_arcs)
    paths: list[tuple[str, ...]] = []
    for _ in range(value):
        path = [flow.source]
        while path[-1] != flow.destination:
            nxt = min(succ[path[-1]])
            succ[path[-1]].discard(nxt)
            path.append(nxt)
        paths.append(tuple(path))
    paths.sort(key=lambda p: (len(p), p))
    scheme = PartitionScheme(flow=flow, paths=tuple(paths[:k]))
    scheme.validate(topology)
    return scheme


def compile_partition_frr(
    topology: Topology, scheme: PartitionScheme, flow: Flow
) -> ForwardingState:
    """Compile path-partition failover into tagged inport suffix rules.

    Forwarding walks P_i; hitting a failed P_i link bounces the packet back
    along P_i until the node where P_{i+1} diverges (the source, for fully
    disjoint paths), which emits it on P_{i+1}. Every rule is a contiguous
    priority-list tail and carries its partition index as a tag.
    """
    if (flow.source, flow.destination) != (scheme.flow.source, scheme.flow.destination):
        raise ValueError("scheme was built for a different flow")
    scheme.validate(topology)
    paths = scheme.paths
    k = len(paths)
    pos: list[dict[str, int]] = [{v: i for i, v in enumerate(p)} for p in paths]

    # Entry layout per node: per partition a forward entry, then (unless this
    # node is where the next path's identical prefix ends) a backward entry.
    entry_out: dict[str, list[str]] = {v: [] for v in topology.nodes}
    entry_tag: dict[str, list[int]] = {v: [] for v in topology.nodes}
    entry_idx: dict[str, dict[tuple[int, str], int]] = {v: {} for v in topology.nodes}

    def _add(v: str, out: str, part: int, role: str) -> None:
        entry_out[v].append(out)
        entry_tag[v].append(part)
        entry_idx[v][(part, role)] = len(entry_out[v])

    for i, path in enumerate(paths, start=1):
        for p in range(len(path) - 1):
            v = path[p]
            _add(v, path[p + 1], i, "fwd")
            if p > 0:
                switch_here = i < k and paths[i][: p + 1] == path[: p + 1]
                if not switch_here:
                    _add(v, path[p - 1], i, "back")

    tables: dict[str, PortTable] = {}
    for v in topology.nodes:
        prio = entry_out[v]
        starts: dict[str | None, int] = {None: 1}
        for u in topology.neighbors(v):
            starts[u] = _partition_inport_start(v, u, paths, pos, entry_idx[v], k)
        tables[v] = PortTable(prio, starts, partition_tag=entry_tag[v] or None)
    return ForwardingState(flow, MODE_SUFFIX, tables)


def _partition_inport_start(
    v: str,
    u: str,
    paths: tuple[tuple[str, ...], ...],
    pos: list[dict[str, int]],
    idx: dict[tuple[int, str], int],
    k: int,
) -> int:
    fwd: list[int] = []
    back: list[int] = []
    for i, path in enumerate(paths, start=1):
        p = pos[i - 1].get(v)
        if p is None or p == len(path) - 1:
            continue
        if p > 0 and path[p - 1] == u:
            fwd.append(i)
        if path[p + 1] == u:
            back.append(i)
    if fwd:
        return idx[(min(fwd), "fwd")]
    if back:
        i = min(back)
        if (i, "back") in idx:
            return idx[(i, "back")]
        if i < k and (i + 1, "fwd") in idx:
            # Backward arrival at the divergence point: jump to the next path.
            return idx[(i + 1, "fwd")]
        # Backward arrival on the last path at the source: nothing left, drop.
        return len(idx) + 1
    return 1


# ---------------------------------------------------------------------------
# Greedy distance-descent failover
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GreedyDag:
    """Per-destination next-hop lists ordered by residual distance.

    Only neighbors at equal or smaller distance are listed; the return edge
    is supplied at lookup time as the demoted last resort, so following a
    listed next hop never increases the distance to the destination.
    """

    destination: str
    order: Mapping[str, tuple[str, ...]]
    dist: Mapping[str, int]


def build_greedy_dag(topology: Topology, flow: Flow) -> GreedyDag:
    flow.validate(topology)
    dist = bfs_distances(topology.arc_adjacency(), flow.destination)
    if len(dist) != len(topology.nodes):
        raise ValueError("topology must be connected for greedy failover")
    order: dict[str, tuple[str, ...]] = {}
    for v in topology.nodes:
        if v == flow.destination:
            order[v] = ()
            continue
        nbrs = [w for w in topology.neighbors(v) if dist[w] <= dist[v]]
        nbrs.sort(key=lambda w: (dist[w], w))
        order[v] = tuple(nbrs)
    return GreedyDag(destination=flow.destination, order=order, dist=dist)


def compile_greedy_frr(topology: Topology, flow: Flow) -> ForwardingState:
    """Compile greedy distance-descent failover (inport-demotion semantics)."""
    dag = build_greedy_dag(topology, flow)
    tables: dict[str, PortTable] = {}
    for v in topology.nodes:
        starts: dict[str | None, int] = {None: 1}
        for u in topology.neighbors(v):
            starts[u] = 1
        tables[v] = PortTable(list(dag.order[v]), starts)
    return ForwardingState(flow, MODE_GREEDY, tables)
