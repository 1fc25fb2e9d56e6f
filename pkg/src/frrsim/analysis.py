"""Metrics, exhaustive failover verification, and the throughput timeline.

The sweep engine enumerates failures, runs the shortcut fixpoint for every
(flow, failure) case, and checks the guarantees the mechanism promises: the
final route is delivered, is a simple path, uses only directed edges of the
initial reroute walk, and (for single link failures) needed exactly one
truncating round when the initial walk looped. Violations are data in the
report, never exceptions.

Throughput is modelled as fluid max-min fairness over per-direction unit
link capacities; the timeline stitches piecewise-constant rate segments for
the three recovery regimes (control plane only, plain fast reroute,
fast reroute plus shortcutting), all of which the control plane eventually
overwrites.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .forwarding import ForwardingState, Outcome, Trace, trace_stats
from .shortcut import FixpointResult, shortcut_fixpoint
from .topology import (
    FailureSet,
    Flow,
    Topology,
    canon_link,
    shortest_path_length,
    shortest_route,
)


def stretch(trace: Trace, topology: Topology, failures: FailureSet, flow: Flow) -> float:
    """Delivered hop count over the residual shortest-path hop count."""
    if trace.outcome is not Outcome.DELIVERED:
        raise ValueError("stretch is defined for delivered traces only")
    optimal = shortest_path_length(topology, failures, flow.source, flow.destination)
    if not optimal:
        raise ValueError("destination unreachable in residual graph")
    return trace.hop_count / optimal


def link_loads(traces: Iterable[Trace]) -> dict[tuple[str, str], int]:
    """Traversal count per directed edge across all traces."""
    loads: dict[tuple[str, str], int] = {}
    for trace in traces:
        for edge in trace.directed_edges():
            loads[edge] = loads.get(edge, 0) + 1
    return loads


# ---------------------------------------------------------------------------
# Failure sweeps
# ---------------------------------------------------------------------------

def enumerate_link_failures(topology: Topology) -> list[FailureSet]:
    return [FailureSet.of(links=[link]) for link in topology.links]


def enumerate_node_failures(topology: Topology, exclude: Iterable[str] = ()) -> list[FailureSet]:
    skip = set(exclude)
    return [FailureSet.of(nodes=[n]) for n in topology.nodes if n not in skip]


@dataclass
class CaseResult:
    """Outcome of one (flow, failure) fixpoint run."""

    flow_id: str
    failure: str
    verdict: str  # delivered | frr_failed | shortcut_failed | exception
    hops_before: int | None = None
    hops_after: int | None = None
    stretch_before: float | None = None
    stretch_after: float | None = None
    rounds: int = 0
    looped_before: bool = False
    simple_after: bool | None = None
    subpath_of_initial: bool | None = None
    loads_monotone: bool | None = None
    loads_strictly_reduced: bool | None = None
    rounds_as_expected: bool | None = None
    violations: list[str] = field(default_factory=list)
    error: str | None = None
    fixpoint: FixpointResult | None = field(default=None, repr=False, compare=False)

    def to_row(self) -> dict:
        fmt = lambda x: "" if x is None else (f"{x:.6g}" if isinstance(x, float) else x)
        return {
            "flow": self.flow_id,
            "failure": self.failure,
            "verdict": self.verdict,
            "hops_before": fmt(self.hops_before),
            "hops_after": fmt(self.hops_after),
            "stretch_before": fmt(self.stretch_before),
            "stretch_after": fmt(self.stretch_after),
            "rounds": self.rounds,
        }


@dataclass
class SweepReport:
    """Aggregate of a failure sweep; violations are expected to be zero."""

    cases: list[CaseResult]
    violations_by_kind: dict[str, int]

    @property
    def total_cases(self) -> int:
        return len(self.cases)

    @property
    def frr_failures(self) -> int:
        return sum(1 for c in self.cases if c.verdict == "frr_failed")

    @property
    def total_violations(self) -> int:
        return sum(self.violations_by_kind.values())

    def summary_dict(self) -> dict:
        return {
            "cases": self.total_cases,
            "frr_precondition_failures": self.frr_failures,
            "violations": self.total_violations,
            "violations_by_kind": dict(sorted(self.violations_by_kind.items())),
        }


def _check_case(case: CaseResult, fp: FixpointResult, check_rounds: bool) -> None:
    initial = fp.initial_trace
    final = fp.final_trace
    stats0 = trace_stats(initial)
    case.looped_before = bool(stats0.looped_nodes)
    case.rounds = fp.rounds
    case.hops_before = initial.hop_count
    case.hops_after = final.hop_count

    if final.outcome is not Outcome.DELIVERED:
        case.verdict = "shortcut_failed"
        case.violations.append("not_delivered")
        return
    case.verdict = "delivered"
    case.simple_after = final.is_simple()
    if not case.simple_after:
        case.violations.append("not_simple")
    edges0 = set(initial.directed_edges())
    case.subpath_of_initial = set(final.directed_edges()) <= edges0
    if not case.subpath_of_initial:
        case.violations.append("not_subpath")

    loads0 = link_loads([initial])
    loads1 = link_loads([final])
    case.loads_monotone = all(loads1.get(e, 0) <= loads0.get(e, 0) for e in edges0)
    case.loads_strictly_reduced = any(
        loads1.get(e, 0) < loads0[e] for e in loads0
    )
    if not case.loads_monotone:
        case.violations.append("load_increase")
    if case.looped_before and not case.loads_strictly_reduced:
        case.violations.append("load_not_reduced")

    if check_rounds:
        expected = 1 if case.looped_before else 0
        case.rounds_as_expected = fp.rounds == expected
        if not case.rounds_as_expected:
            case.violations.append("rounds_mismatch")


def run_failure_sweep(
    topology: Topology,
    compile_state: Callable[[Flow], ForwardingState],
    flows: Sequence[Flow],
    failure_sets: Sequence[FailureSet],
    check_rounds: bool = True,
) -> SweepReport:
    """Run the shortcut fixpoint for every (flow, failure) pair and verify it.

    ``compile_state`` returns the pristine state for a flow; each case works
    on its own copy. Cases where the base reroute already fails to deliver
    are reported as frr_failed and excluded from the guarantee checks.
    """
    cases: list[CaseResult] = []
    violations: dict[str, int] = {}
    for flow in flows:
        base = compile_state(flow)
        for failures in failure_sets:
            if flow.source in failures.failed_nodes or (
                flow.destination in failures.failed_nodes
            ):
                continue
            case = CaseResult(flow_id=flow.flow_id, failure=failures.label(), verdict="")
            try:
                state = base.copy()
                fp = shortcut_fixpoint(state, topology, failures, flow)
                case.fixpoint = fp
                if fp.initial_trace.outcome is not Outcome.DELIVERED:
                    case.verdict = "frr_failed"
                    case.hops_before = fp.initial_trace.hop_count
                else:
                    _check_case(case, fp, check_rounds)
                    case.stretch_before = stretch(fp.initial_trace, topology, failures, flow)
                    if fp.delivered:
                        case.stretch_after = stretch(fp.final_trace, topology, failures, flow)
            except Exception as exc:  # exceptions are violations, not aborts
                case.verdict = "exception"
                case.error = f"{type(exc).__name__}: {exc}"
                case.violations.append("exception")
            for kind in case.violations:
                violations[kind] = violations.get(kind, 0) + 1
            cases.append(case)
    return SweepReport(cases=cases, violations_by_kind=violations)


def report_csv(report: SweepReport) -> str:
    """CSV rows: flow, failure, verdict, hops and stretch before/after, rounds."""
    buf = io.StringIO()
    fields = [
        "flow",
        "failure",
        "verdict",
        "hops_before",
        "hops_after",
        "stretch_before",
        "stretch_after",
        "rounds",
    ]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for case in sorted(report.cases, key=lambda c: (c.flow_id, c.failure)):
        writer.writerow(case.to_row())
    return buf.getvalue()


def report_json(report: SweepReport) -> str:
    payload = {
        "summary": report.summary_dict(),
        "cases": [
            {**case.to_row(), "violations": case.violations, "error": case.error}
            for case in sorted(report.cases, key=lambda c: (c.flow_id, c.failure))
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Max-min fair throughput
# ---------------------------------------------------------------------------

def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


def maxmin_throughput(
    routes: Mapping[str, Sequence[tuple[str, str]]],
    capacities: Mapping[tuple[str, str], object],
    demands: Mapping[str, object] | None = None,
) -> dict[str, Fraction]:
    """Progressive water-filling max-min allocation with exact arithmetic.

    ``routes`` maps a flow id to the directed edges it traverses;
    ``capacities`` gives per directed edge rates. All flows rise together
    until a link saturates or a demand (default 1) is met; saturated flows
    freeze and the rest continue.
    """
    demand = {f: _as_fraction((demands or {}).get(f, 1)) for f in routes}
    residual: dict[tuple[str, str], Fraction] = {}
    users: dict[tuple[str, str], set[str]] = {}
    for flow_id, edges in routes.items():
        for edge in edges:
            if edge not in capacities:
                raise ValueError(f"no capacity defined for edge {edge}")
            cap = _as_fraction(capacities[edge])
            if cap <= 0:
                raise ValueError(f"flow {flow_id!r} routed over zero-capacity edge {edge}")
            residual[edge] = cap
            users.setdefault(edge, set()).add(flow_id)

    rates = {f: Fraction(0) for f in routes}
    active = set(routes)
    while active:
        increments = [demand[f] - rates[f] for f in active]
        for edge, flows_on_edge in users.items():
            sharing = flows_on_edge & active
            if sharing:
                increments.append(residual[edge] / len(sharing))
        delta = min(increments)
        for f in active:
            rates[f] += delta
        for edge, flows_on_edge in users.items():
            residual[edge] -= delta * len(flows_on_edge & active)
        frozen = {f for f in active if rates[f] == demand[f]}
        for edge, flows_on_edge in users.items():
            if residual[edge] == 0:
                frozen |= flows_on_edge & active
        if not frozen:  # all increments were zero; nothing can grow
            break
        active -= frozen
    return rates


# ---------------------------------------------------------------------------
# Convergence timeline
# ---------------------------------------------------------------------------

REGIME_CONTROL = "control_plane"
REGIME_FRR = "frr_only"
REGIME_SHORTCUT = "frr_shortcut"
REGIMES = (REGIME_CONTROL, REGIME_FRR, REGIME_SHORTCUT)


@dataclass(frozen=True)
class FlowTimelinePlan:
    """Routes one flow uses in each phase of the recovery story."""

    flow_id: str
    pre_route: tuple[tuple[str, str], ...]
    frr_route: tuple[tuple[str, str], ...] | None
    shortcut_route: tuple[tuple[str, str], ...] | None
    converged_route: tuple[tuple[str, str], ...] | None
    affected: bool


@dataclass(frozen=True)
class TimelineSegment:
    start: Fraction
    end: Fraction
    regime: str
    rates: Mapping[str, Fraction]
    routes: Mapping[str, tuple[tuple[str, str], ...]]


@dataclass
class Timeline:
    segments: dict[str, list[TimelineSegment]]
    sample_step: Fraction
    horizon: Fraction

    def samples(self) -> list[tuple[Fraction, str, Fraction, str]]:
        """(time, flow, rate, regime) rows at sample_step granularity."""
        rows = []
        for regime in REGIMES:
            segs = self.segments[regime]
            flow_ids = sorted(segs[0].rates)
            for flow_id in flow_ids:
                t = Fraction(0)
                while t < self.horizon:
                    seg = next(s for s in segs if s.start <= t < s.end)
                    rows.append((t, flow_id, seg.rates[flow_id], regime))
                    t += self.sample_step
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time", "flow", "rate", "regime"])
        for t, flow_id, rate, regime in sorted(
            self.samples(), key=lambda r: (r[3], r[1], r[0])
        ):
            writer.writerow([repr(float(t)), flow_id, repr(float(rate)), regime])
        return buf.getvalue()


def path_edges(path: Sequence[str]) -> tuple[tuple[str, str], ...]:
    return tuple((a, b) for a, b in zip(path, path[1:]))


def unit_capacities(topology: Topology) -> dict[tuple[str, str], Fraction]:
    return {edge: Fraction(1) for edge in topology.directed_edges()}


def convergence_timeline(
    plans: Sequence[FlowTimelinePlan],
    capacities: Mapping[tuple[str, str], object],
    failure_effective: object,
    control_plane_delay: object,
    shortcut_delay: object,
    sample_step: object = Fraction(1, 10),
    horizon: object | None = None,
) -> Timeline:
    """Piecewise-constant per-flow rates under the three recovery regimes.

    The failure takes effect at ``failure_effective``. Control-plane-only
    blackholes affected flows for ``control_plane_delay`` seconds, then uses
    the converged routes. Plain fast reroute runs the looped walks until the
    control plane converges. With shortcutting, the looped walks last one
    ``shortcut_delay`` and the shortcut routes take over until convergence.
    """
    t_eff = _as_fraction(failure_effective)
    cp = _as_fraction(control_plane_delay)
    sc = _as_fraction(shortcut_delay)
    step = _as_fraction(sample_step)
    for name, v in (("failure_effective", t_eff), ("control_plane_delay", cp),
                    ("shortcut_delay", sc), ("sample_step", step)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    if step == 0:
        raise ValueError("sample_step must be positive")
    end = _as_fraction(horizon) if horizon is not None else t_eff + cp + Fraction(2)
    if end <= t_eff:
        raise ValueError("horizon must extend past the failure instant")

    caps = {e: _as_fraction(c) for e, c in capacities.items()}

    def rates_for(phase_routes: dict[str, tuple[tuple[str, str], ...] | None]):
        present = {f: r for f, r in phase_routes.items() if r is not None}
        rates = maxmin_throughput(present, caps)
        return {f: rates.get(f, Fraction(0)) for f in phase_routes}, {
            f: (r or ()) for f, r in phase_routes.items()
        }

    pre = {p.flow_id: p.pre_route for p in plans}
    frr = {p.flow_id: (p.frr_route if p.affected else p.pre_route) for p in plans}
    scut = {p.flow_id: (p.shortcut_route if p.affected else p.pre_route) for p in plans}
    conv = {p.flow_id: p.converged_route for p in plans}
    blackhole = {p.flow_id: (None if p.affected else p.pre_route) for p in plans}

    def build(regime: str, phases: list[tuple[Fraction, Fraction, dict]]):
        segs = []
        for start, stop, phase_routes in phases:
            start, stop = min(start, end), min(stop, end)
            if stop <= start:
                continue
            rates, routes = rates_for(phase_routes)
            segs.append(TimelineSegment(start, stop, regime, rates, routes))
        return segs

    control = build(REGIME_CONTROL, [
        (Fraction(0), t_eff, pre),
        (t_eff, t_eff + cp, blackhole),
        (t_eff + cp, end, conv),
    ])
    frr_only = build(REGIME_FRR, [
        (Fraction(0), t_eff, pre),
        (t_eff, t_eff + cp, frr),
        (t_eff + cp, end, conv),
    ])
    frr_shortcut = build(REGIME_SHORTCUT, [
        (Fraction(0), t_eff, pre),
        (t_eff, t_eff + min(sc, cp), frr),
        (t_eff + min(sc, cp), t_eff + cp, scut),
        (t_eff + cp, end, conv),
    ])
    return Timeline(
        segments={
            REGIME_CONTROL: control,
            REGIME_FRR: frr_only,
            REGIME_SHORTCUT: frr_shortcut,
        },
        sample_step=step,
        horizon=end,
    )


def build_flow_plan(
    topology: Topology,
    failures: FailureSet,
    flow: Flow,
    pre_trace: Trace,
    fixpoint: FixpointResult,
) -> FlowTimelinePlan:
    """Timeline plan for a primary flow from its simulated traces."""
    dead = failures.dead_links(topology)
    pre_edges = path_edges(pre_trace.node_path())
    affected = any(canon_link(u, v) in dead for u, v in pre_edges)
    converged = shortest_route(topology, failures, flow.source, flow.destination)
    return FlowTimelinePlan(
        flow_id=flow.flow_id,
        pre_route=pre_edges,
        frr_route=path_edges(fixpoint.initial_trace.node_path())
        if fixpoint.initial_trace.outcome is Outcome.DELIVERED
        else None,
        shortcut_route=path_edges(fixpoint.final_trace.node_path())
        if fixpoint.delivered
        else None,
        converged_route=path_edges(converged) if converged else None,
        affected=affected,
    )


def background_flow_plan(
    topology: Topology, failures: FailureSet, flow_id: str, path: Sequence[str]
) -> FlowTimelinePlan:
    """Plan for a fixed-route background flow; it must avoid the failure."""
    edges = path_edges(path)
    for a, b in edges:
        if not topology.has_link(a, b):
            raise ValueError(f"background route step ({a}, {b}) is not a link")
    dead = failures.dead_links(topology)
    if any(canon_link(u, v) in dead for u, v in edges):
        raise ValueError(f"background flow {flow_id!r} route crosses the failure")
    return FlowTimelinePlan(
        flow_id=flow_id,
        pre_route=edges,
        frr_route=edges,
        shortcut_route=edges,
        converged_route=edges,
        affected=False,
    )
