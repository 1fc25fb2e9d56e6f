"""Deterministic failover-routing simulator with data-plane loop shortcutting."""

from .analysis import (
    CaseResult,
    SweepReport,
    Timeline,
    convergence_timeline,
    enumerate_link_failures,
    enumerate_node_failures,
    link_loads,
    maxmin_throughput,
    run_failure_sweep,
    stretch,
)
from .forwarding import (
    ForwardingState,
    Hop,
    Outcome,
    PortTable,
    Trace,
    TraceStats,
    route,
    trace_stats,
)
from .frr import (
    Arborescence,
    DecompositionError,
    GreedyDag,
    PartitionScheme,
    build_greedy_dag,
    compile_arborescence_frr,
    compile_greedy_frr,
    compile_partition_frr,
    compute_disjoint_paths,
    decompose_arborescences,
)
from .shortcut import (
    FixpointResult,
    RuleChange,
    greedy_shortcut,
    observe_and_truncate,
    partition_shortcut,
    shortcut_fixpoint,
)
from .topology import (
    FailureSet,
    Flow,
    Topology,
    build_topology,
    edge_connectivity,
    figure1_topology,
    shortest_path_length,
    shortest_route,
)

__version__ = "0.1.0"
