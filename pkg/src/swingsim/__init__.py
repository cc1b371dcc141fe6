"""Allreduce schedule generation, verification, and cost simulation.

Builds step-synchronous communication schedules (swing, ring, recursive
doubling, bucket) for torus, board-grid, and hyperx networks, checks them
transfer by transfer, and prices them under an alpha-beta cost model with
minimal-path routing.
"""

from .analysis import (
    DeficiencyReport,
    VariantChoice,
    best_variant,
    deficiencies,
    predicted_latency_variant_congestion,
    predicted_swing_congestion,
    xi_q,
)
from .baselines import (
    BaselineAlgorithm,
    BaselineParams,
    build_baseline,
    build_bucket,
    build_recdoub_bandwidth,
    build_recdoub_latency,
    build_recdoub_mirrored,
    build_ring,
)
from .netsim import (
    CostParams,
    SimResult,
    StepCost,
    goodput,
    max_link_multiplicity,
    simulate,
)
from .schedule import (
    BlockSet,
    Phase,
    Schedule,
    Step,
    Transfer,
    bytes_transmitted_per_node,
    count_steps,
    dump_schedule,
    expand_steps,
    transfer_fraction,
    validate,
)
from .swing import (
    LatencyMultiportMode,
    SwingParams,
    Variant,
    build_swing,
    delta,
    peer_multidim,
    pi,
    rho,
    rs_block_indices,
)
from .topology import Family, Link, LinkKind, Topology, TopologyKind, build, parse_topology
from .verify import VerifyReport, verify_allreduce, verify_reduce_scatter

__version__ = "0.1.0"

__all__ = [
    "BaselineAlgorithm",
    "BaselineParams",
    "BlockSet",
    "CostParams",
    "DeficiencyReport",
    "Family",
    "LatencyMultiportMode",
    "Link",
    "LinkKind",
    "Phase",
    "Schedule",
    "SimResult",
    "Step",
    "StepCost",
    "SwingParams",
    "Topology",
    "TopologyKind",
    "Transfer",
    "VariantChoice",
    "Variant",
    "VerifyReport",
    "best_variant",
    "build",
    "build_baseline",
    "build_bucket",
    "build_recdoub_bandwidth",
    "build_recdoub_latency",
    "build_recdoub_mirrored",
    "build_ring",
    "build_swing",
    "bytes_transmitted_per_node",
    "count_steps",
    "deficiencies",
    "delta",
    "dump_schedule",
    "expand_steps",
    "goodput",
    "max_link_multiplicity",
    "parse_topology",
    "peer_multidim",
    "pi",
    "predicted_latency_variant_congestion",
    "predicted_swing_congestion",
    "rho",
    "rs_block_indices",
    "simulate",
    "transfer_fraction",
    "validate",
    "verify_allreduce",
    "verify_reduce_scatter",
    "xi_q",
]
