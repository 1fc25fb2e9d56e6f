"""Graph model, topology generators, failure sets, and connectivity oracles.

Node identifiers are non-empty strings. Links are undirected and stored as
canonically ordered pairs; every link contributes both directed orientations
to the directed-edge view used by the forwarding engine.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from typing import Iterable, Mapping


def canon_link(a: str, b: str) -> tuple[str, str]:
    """Canonical (sorted) form of an undirected link."""
    return (a, b) if a <= b else (b, a)


class Topology:
    """Immutable undirected graph of nodes and links.

    All iteration orders (neighbors, links, directed edges) are sorted, so
    every algorithm built on top of a Topology is deterministic.
    """

    def __init__(self, nodes: Iterable[str], links: Iterable[tuple[str, str]]):
        node_list = list(nodes)
        for n in node_list:
            if not isinstance(n, str) or not n:
                raise ValueError(f"node ids must be non-empty strings, got {n!r}")
        self.nodes: tuple[str, ...] = tuple(sorted(set(node_list)))
        if len(self.nodes) != len(node_list):
            raise ValueError("duplicate node ids")
        node_set = set(self.nodes)
        seen: set[tuple[str, str]] = set()
        for a, b in links:
            if a == b:
                raise ValueError(f"self-loop on {a!r} not allowed")
            if a not in node_set or b not in node_set:
                raise ValueError(f"link ({a!r}, {b!r}) references undeclared node")
            link = canon_link(a, b)
            if link in seen:
                raise ValueError(f"duplicate link {link}")
            seen.add(link)
        self.links: tuple[tuple[str, str], ...] = tuple(sorted(seen))
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.links:
            adj[a].append(b)
            adj[b].append(a)
        self._adj: dict[str, tuple[str, ...]] = {
            n: tuple(sorted(vs)) for n, vs in adj.items()
        }

    @property
    def m(self) -> int:
        """Directed-edge count: exactly twice the link count."""
        return 2 * len(self.links)

    def neighbors(self, v: str) -> tuple[str, ...]:
        return self._adj[v]

    def degree(self, v: str) -> int:
        return len(self._adj[v])

    def has_node(self, v: str) -> bool:
        return v in self._adj

    def has_link(self, a: str, b: str) -> bool:
        return canon_link(a, b) in self._link_set()

    def _link_set(self) -> frozenset[tuple[str, str]]:
        cached = getattr(self, "_links_frozen", None)
        if cached is None:
            cached = frozenset(self.links)
            self._links_frozen = cached
        return cached

    def directed_edges(self) -> list[tuple[str, str]]:
        out = []
        for u in self.nodes:
            for v in self._adj[u]:
                out.append((u, v))
        return out

    def arc_adjacency(self) -> dict[str, tuple[str, ...]]:
        """Adjacency of the bidirected view (same object as neighbors)."""
        return dict(self._adj)

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        dist = bfs_distances(self._adj, self.nodes[0])
        return len(dist) == len(self.nodes)

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "links": [list(l) for l in self.links]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Topology":
        try:
            nodes = [str(n) for n in data["nodes"]]
            links = [(str(a), str(b)) for a, b in data["links"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed topology document: {exc}") from exc
        return cls(nodes, links)

    @classmethod
    def from_file(cls, path: str) -> "Topology":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"cannot parse topology file {path}: {exc}") from exc
        return cls.from_dict(data)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Topology)
            and self.nodes == other.nodes
            and self.links == other.links
        )

    def __hash__(self) -> int:
        return hash((self.nodes, self.links))

    def __repr__(self) -> str:
        return f"Topology(n={len(self.nodes)}, links={len(self.links)})"


@dataclass(frozen=True)
class Flow:
    """A forwarding equivalence class: one source/destination pair."""

    source: str
    destination: str
    flow_id: str = ""

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError("flow source and destination must differ")
        if not self.flow_id:
            object.__setattr__(self, "flow_id", f"{self.source}->{self.destination}")

    def validate(self, topology: Topology) -> None:
        for v in (self.source, self.destination):
            if not topology.has_node(v):
                raise ValueError(f"flow endpoint {v!r} is not a topology node")


@dataclass(frozen=True)
class FailureSet:
    """Failed links and failed nodes; a failed node takes all incident links down."""

    failed_links: frozenset[tuple[str, str]] = frozenset()
    failed_nodes: frozenset[str] = frozenset()

    @classmethod
    def of(cls, links: Iterable[tuple[str, str]] = (), nodes: Iterable[str] = ()) -> "FailureSet":
        return cls(
            failed_links=frozenset(canon_link(a, b) for a, b in links),
            failed_nodes=frozenset(nodes),
        )

    @classmethod
    def none(cls) -> "FailureSet":
        return cls()

    def validate(self, topology: Topology) -> None:
        for link in self.failed_links:
            if link not in set(topology.links):
                raise ValueError(f"failed link {link} does not exist")
        for node in self.failed_nodes:
            if not topology.has_node(node):
                raise ValueError(f"failed node {node!r} does not exist")

    def dead_links(self, topology: Topology) -> frozenset[tuple[str, str]]:
        """All links unusable under this failure set (derived view)."""
        dead = set(self.failed_links)
        for node in self.failed_nodes:
            for nbr in topology.neighbors(node):
                dead.add(canon_link(node, nbr))
        return frozenset(dead)

    def is_empty(self) -> bool:
        return not self.failed_links and not self.failed_nodes

    def label(self) -> str:
        parts = [f"link:{a}-{b}" for a, b in sorted(self.failed_links)]
        parts += [f"node:{n}" for n in sorted(self.failed_nodes)]
        return "+".join(parts) if parts else "none"


# ---------------------------------------------------------------------------
# Path and connectivity oracles
# ---------------------------------------------------------------------------

def bfs_distances(adj: Mapping[str, Iterable[str]], source: str) -> dict[str, int]:
    """Hop distances from source over an adjacency mapping."""
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def residual_adjacency(topology: Topology, failures: FailureSet) -> dict[str, list[str]]:
    """Adjacency of the graph with failed links and nodes removed."""
    dead = failures.dead_links(topology)
    down = failures.failed_nodes
    adj: dict[str, list[str]] = {}
    for u in topology.nodes:
        if u in down:
            continue
        adj[u] = [
            v
            for v in topology.neighbors(u)
            if v not in down and canon_link(u, v) not in dead
        ]
    return adj


def shortest_path_length(
    topology: Topology, failures: FailureSet, a: str, b: str
) -> int | None:
    """Hop count of the shortest residual path, or None if unreachable."""
    for v in (a, b):
        if not topology.has_node(v):
            raise ValueError(f"unknown node {v!r}")
        if v in failures.failed_nodes:
            raise ValueError(f"query endpoint {v!r} is a failed node")
    if a == b:
        return 0
    dist = bfs_distances(residual_adjacency(topology, failures), a)
    return dist.get(b)


def shortest_route(
    topology: Topology, failures: FailureSet, a: str, b: str
) -> tuple[str, ...] | None:
    """Lexicographically smallest shortest residual path, or None."""
    adj = residual_adjacency(topology, failures)
    if a not in adj or b not in adj:
        return None
    dist = bfs_distances(adj, b)
    if a not in dist:
        return None
    path = [a]
    cur = a
    while cur != b:
        cur = min(v for v in adj[cur] if dist.get(v, -1) == dist[cur] - 1)
        path.append(cur)
    return tuple(path)


def unit_max_flow(
    adj: Mapping[str, Iterable[str]],
    source: str,
    sink: str,
    limit: int | None = None,
    return_flow: bool = False,
):
    """Max flow with unit arc capacities via BFS augmenting paths.

    Opposite flows cancel, so on a bidirected adjacency the value equals the
    number of edge-disjoint undirected paths. Deterministic: neighbors are
    explored in sorted order. Returns the value, or ``(value, flow_arcs)``
    when return_flow is set, where flow_arcs is the set of net-flow arcs.
    """
    flow: set[tuple[str, str]] = set()
    value = 0
    while limit is None or value < limit:
        parent: dict[str, str | None] = {source: None}
        frontier = [source]
        while frontier and sink not in parent:
            nxt = []
            for u in frontier:
                candidates = set(adj.get(u, ()))
                candidates.update(v for (v, w) in flow if w == u)
                for v in sorted(candidates):
                    if v in parent:
                        continue
                    usable = ((v, u) in flow) or (v in adj.get(u, ()) and (u, v) not in flow)
                    if not usable:
                        continue
                    parent[v] = u
                    nxt.append(v)
            frontier = nxt
        if sink not in parent:
            break
        v = sink
        while v != source:
            u = parent[v]
            if (v, u) in flow:
                flow.discard((v, u))
            else:
                flow.add((u, v))
            v = u
        value += 1
    if return_flow:
        return value, flow
    return value


def edge_connectivity(topology: Topology) -> int:
    """Global edge connectivity: min over max-flow min-cuts from a fixed source."""
    if len(topology.nodes) < 2:
        return 0
    if not topology.is_connected():
        return 0
    adj = topology.arc_adjacency()
    src = topology.nodes[0]
    best: int | None = None
    for target in topology.nodes[1:]:
        value = unit_max_flow(adj, src, target, limit=best)
        if best is None or value < best:
            best = value
    return best or 0


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

_COMPACT = re.compile(r"^(\w+)(?:\(([\d,\s]*)\))?$")


def _parse_descriptor(spec) -> dict:
    if isinstance(spec, Mapping):
        d = dict(spec)
        if "kind" not in d:
            raise ValueError("topology descriptor needs a 'kind'")
        return d
    if isinstance(spec, str):
        m = _COMPACT.match(spec.strip())
        if not m:
            raise ValueError(f"cannot parse topology descriptor {spec!r}")
        kind, args = m.group(1), m.group(2)
        nums = [int(x) for x in args.split(",")] if args else []
        if kind == "figure1":
            return {"kind": "figure1"}
        if kind == "complete" and len(nums) == 1:
            return {"kind": "complete", "n": nums[0]}
        if kind == "torus" and len(nums) == 2:
            return {"kind": "torus", "a": nums[0], "b": nums[1]}
        if kind == "hypercube" and len(nums) == 1:
            return {"kind": "hypercube", "d": nums[0]}
        raise ValueError(f"cannot parse topology descriptor {spec!r}")
    raise ValueError(f"unsupported topology descriptor type {type(spec)!r}")


def figure1_topology() -> Topology:
    """The bundled 7-node example: S feeds S1, two routes to D rejoin at S4."""
    nodes = ["S", "H", "S1", "S2", "S3", "S4", "D"]
    links = [
        ("S", "S1"),
        ("H", "S1"),
        ("S1", "S2"),
        ("S1", "S3"),
        ("S2", "S4"),
        ("S3", "S4"),
        ("S4", "D"),
    ]
    return Topology(nodes, links)


def _complete(n: int) -> Topology:
    if n < 3:
        raise ValueError("complete(n) requires n >= 3")
    nodes = [str(i) for i in range(n)]
    links = [(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n)]
    return Topology(nodes, links)


def _torus(a: int, b: int) -> Topology:
    if a < 3 or b < 3:
        raise ValueError("torus(a, b) requires a >= 3 and b >= 3")
    name = lambda i, j: f"{i}_{j}"
    nodes = [name(i, j) for i in range(a) for j in range(b)]
    links = []
    for i in range(a):
        for j in range(b):
            links.append((name(i, j), name(i, (j + 1) % b)))
            links.append((name(i, j), name((i + 1) % a, j)))
    return Topology(nodes, links)


def _hypercube(d: int) -> Topology:
    if d < 2:
        raise ValueError("hypercube(d) requires d >= 2")
    nodes = [format(i, f"0{d}b") for i in range(2**d)]
    links = []
    for i in range(2**d):
        for bit in range(d):
            j = i ^ (1 << bit)
            if i < j:
                links.append((nodes[i], nodes[j]))
    return Topology(nodes, links)


def _random(n: int, p: float, seed: int, min_edge_connectivity: int = 1,
            max_tries: int = 1000) -> Topology:
    if n < 2 or not (0.0 < p <= 1.0):
        raise ValueError("random(n, p) requires n >= 2 and 0 < p <= 1")
    for attempt in range(max_tries):
        rng = random.Random(seed + attempt)
        nodes = [str(i) for i in range(n)]
        links = [
            (nodes[i], nodes[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < p
        ]
        try:
            topo = Topology(nodes, links)
        except ValueError:
            continue
        if topo.is_connected() and edge_connectivity(topo) >= min_edge_connectivity:
            return topo
    raise RuntimeError(
        f"random generator exhausted {max_tries} seeds without reaching "
        f"edge connectivity {min_edge_connectivity}"
    )


def build_topology(spec) -> Topology:
    """Build a topology from a generator descriptor (dict or compact string)."""
    d = _parse_descriptor(spec)
    kind = d["kind"]
    try:
        if kind == "figure1":
            return figure1_topology()
        if kind == "complete":
            return _complete(int(d["n"]))
        if kind == "torus":
            return _torus(int(d["a"]), int(d["b"]))
        if kind == "hypercube":
            return _hypercube(int(d["d"]))
        if kind == "random":
            if "seed" not in d:
                raise ValueError("random topology descriptor requires a seed")
            return _random(
                int(d["n"]),
                float(d["p"]),
                int(d["seed"]),
                int(d.get("min_edge_connectivity", 1)),
            )
        if kind == "from_file":
            return Topology.from_file(d["path"])
    except KeyError as exc:
        raise ValueError(f"topology descriptor {d!r} is missing {exc}") from exc
    raise ValueError(f"unknown topology kind {kind!r}")
