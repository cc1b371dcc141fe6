"""Flow-level cost model for communication schedules.

Steps are globally synchronized. A step costs

    max over transfers of (wire latency along its path)
  + one hop-processing charge
  + (most loaded directed link's bytes) * beta

and a schedule costs the sum of its steps. Every transfer is routed over
the topology's minimal paths; on an exact tie (the half-ring case) its
bytes split evenly across the alternatives. Wire latency is alpha_link per
cable or fabric hop and alpha_mesh per intra-board hop.

Per-link loads scale linearly with the vector size, so routing happens
once per (schedule, topology) into a plan of per-step aggregates;
evaluating a size is then cheap. Rotated repetitions of a step permute
block indices without changing transfer sizes or endpoints, which is why a
plan step's cost is valid for all its repetitions.
"""

from __future__ import annotations

import weakref
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .schedule import BlockSet, Schedule, Step, transfer_fraction
from .topology import DEFAULT_INTRA_BOARD_LATENCY_NS, Link, LinkKind, Topology


@dataclass(frozen=True)
class CostParams:
    alpha_link: int
    alpha_proc: int
    beta: Fraction  # ns per byte per link
    alpha_mesh: int = DEFAULT_INTRA_BOARD_LATENCY_NS

    def __post_init__(self) -> None:
        if min(self.alpha_link, self.alpha_proc, self.alpha_mesh) < 0 or self.beta < 0:
            raise ValueError("cost parameters must be non-negative")

    @classmethod
    def from_topology(cls, topology: Topology) -> "CostParams":
        return cls(
            alpha_link=topology.link_latency_ns,
            alpha_proc=topology.hop_processing_ns,
            beta=Fraction(8, topology.link_bandwidth_gbps),
            alpha_mesh=topology.intra_board_latency_ns,
        )


@dataclass(frozen=True)
class StepCost:
    latency_term: Fraction | int
    bandwidth_term: Fraction
    bottleneck_link: Link | None
    bottleneck_bytes: Fraction

    @property
    def time(self) -> Fraction:
        return self.latency_term + self.bandwidth_term


@dataclass(frozen=True)
class SimResult:
    total_time: Fraction
    per_step: tuple[StepCost, ...]
    goodput: float  # Gb/s
    effective_n: int


def goodput(result: SimResult) -> float:
    """Reduced bits per nanosecond, i.e. Gb/s."""
    if result.total_time <= 0:
        raise ValueError("schedule took no time; goodput undefined")
    return float(Fraction(8 * result.effective_n) / result.total_time)


@dataclass(frozen=True)
class _Route:
    npaths: int
    lat_pairs: tuple[tuple[int, int], ...]  # (cable-or-fabric hops, mesh hops)
    links: tuple[tuple[Link, int], ...]  # link -> number of paths crossing it
    first: tuple[tuple[Link, int], ...]  # injection wires (first hop of each path)


_WIRE_LATENCY_KINDS = (LinkKind.CABLE, LinkKind.FABRIC_UP, LinkKind.FABRIC_DOWN)


def _pareto(pairs: set[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    return tuple(
        (c, m)
        for c, m in pairs
        if not any(c2 >= c and m2 >= m and (c2, m2) != (c, m) for c2, m2 in pairs)
    )


def _route(topology: Topology, src: int, dst: int) -> _Route:
    paths = topology.minimal_paths(src, dst)
    pairs = set()
    links: Counter[Link] = Counter()
    first: Counter[Link] = Counter()
    for path in paths:
        cable = sum(1 for l in path if l.kind in _WIRE_LATENCY_KINDS)
        pairs.add((cable, len(path) - cable))
        links.update(path)
        first[path[0]] += 1
    return _Route(len(paths), _pareto(pairs), tuple(links.items()), tuple(first.items()))


@dataclass(frozen=True)
class _PlanStep:
    lat_pairs: tuple[tuple[int, int], ...]
    max_link_frac: Fraction  # fraction of n on the most loaded link
    bottleneck: Link | None
    max_inj_frac: Fraction  # fraction of n on the most loaded injection wire
    max_port_frac: Fraction  # fraction of n on the busiest (node, port)
    max_multiplicity: float
    repeat: int


@dataclass(frozen=True)
class _Plan:
    steps: tuple[_PlanStep, ...]


_plan_cache: "weakref.WeakKeyDictionary[Schedule, dict[Topology, _Plan]]" = (
    weakref.WeakKeyDictionary()
)


def _plan_step(
    schedule: Schedule, step: Step, topology: Topology, routes: dict
) -> _PlanStep:
    # Loads accumulate in units of 1/(U*M) of the vector: U clears payload
    # fractions, M clears even splits (at most 2 minimal paths per dimension).
    U = (schedule.num_blocks or 1) * schedule.num_collectives
    M = 1 << topology.num_dims
    loads: Counter[Link] = Counter()
    inj: Counter[Link] = Counter()
    ports: Counter[tuple[int, int]] = Counter()
    mult: Counter[Link] = Counter()
    pairs = set()
    for t in step.transfers:
        route = routes.get((t.src, t.dst))
        if route is None:
            route = _route(topology, t.src, t.dst)
            routes[t.src, t.dst] = route
        units = transfer_fraction(schedule, t) * U
        if units.denominator != 1 or M % route.npaths:
            raise ValueError(f"transfer does not fit the 1/{U * M} load grid")
        per_path = int(units) * (M // route.npaths)
        for link, crossings in route.links:
            loads[link] += per_path * crossings
            mult[link] += (M // route.npaths) * crossings
        for link, crossings in route.first:
            inj[link] += per_path * crossings
        if t.port is not None:
            ports[t.src, t.port] += int(units) * M
        pairs.update(route.lat_pairs)
    bottleneck, peak = max(loads.items(), key=lambda kv: kv[1])
    return _PlanStep(
        lat_pairs=_pareto(pairs),
        max_link_frac=Fraction(peak, U * M),
        bottleneck=bottleneck,
        max_inj_frac=Fraction(max(inj.values()), U * M),
        max_port_frac=Fraction(max(ports.values()), U * M) if ports else Fraction(0),
        max_multiplicity=max(mult.values()) / M,
        repeat=step.repeat,
    )


def _plan_for(schedule: Schedule, topology: Topology) -> _Plan:
    by_topology = _plan_cache.setdefault(schedule, {})
    plan = by_topology.get(topology)
    if plan is None:
        if schedule.p != topology.num_nodes:
            raise ValueError(
                f"schedule is for {schedule.p} nodes, topology has {topology.num_nodes}"
            )
        routes: dict = {}
        plan = _Plan(
            tuple(_plan_step(schedule, st, topology, routes) for st in schedule.steps)
        )
        by_topology[topology] = plan
    return plan


def route_step(
    step: Step, topology: Topology, n: int, share: Fraction = Fraction(1)
) -> dict[Link, Fraction]:
    """Directed-link byte loads of one repetition of a step.

    share scales block/whole-vector payloads by the sub-collective's slice
    of the vector (Schedule.share); tie paths split bytes evenly.
    """
    loads: dict[Link, Fraction] = {}
    for t in step.transfers:
        if isinstance(t.payload, BlockSet):
            frac = share * Fraction(t.payload.count, t.payload.size)
        else:
            frac = share * t.payload
        paths = topology.minimal_paths(t.src, t.dst)
        bytes_per_path = frac * n / len(paths)
        for path in paths:
            for link in path:
                loads[link] = loads.get(link, Fraction(0)) + bytes_per_path
    return loads


def simulate(
    schedule: Schedule, topology: Topology, cost_params: CostParams, n: int
) -> SimResult:
    """Cost of an n-byte allreduce; n is rounded up to the block granule."""
    if not schedule.steps:
        raise ValueError("schedule has no steps")
    if n < 0:
        raise ValueError(f"vector size {n} is negative")
    plan = _plan_for(schedule, topology)
    granule = schedule.granule
    effective_n = -(-n // granule) * granule
    per_step: list[StepCost] = []
    total = Fraction(0)
    for ps in plan.steps:
        latency = (
            max(c * cost_params.alpha_link + m * cost_params.alpha_mesh for c, m in ps.lat_pairs)
            + cost_params.alpha_proc
        )
        bandwidth = ps.max_link_frac * effective_n * cost_params.beta
        cost = StepCost(latency, bandwidth, ps.bottleneck, ps.max_link_frac * effective_n)
        per_step.extend([cost] * ps.repeat)
        total += (latency + bandwidth) * ps.repeat
    gput = float(Fraction(8 * effective_n) / total) if effective_n and total else 0.0
    # busiest node moves >= 2n(p-1)/p bytes over 2D full-duplex ports, so
    # goodput is bounded by D * link_bw * p/(p-1); the finite-size factor
    # matters at small p
    p = schedule.p
    peak = Fraction(topology.num_dims * topology.link_bandwidth_gbps * p, p - 1)
    if gput > peak * (1 + Fraction(1, 10**9)):
        raise RuntimeError(f"goodput {gput:.3f} exceeds the {float(peak):.1f} Gb/s bound; model broken")
    return SimResult(total, tuple(per_step), gput, effective_n)


def max_link_multiplicity(schedule: Schedule, topology: Topology) -> float:
    """Most transfers sharing one directed link in any step (tie paths count
    fractionally)."""
    plan = _plan_for(schedule, topology)
    return max(ps.max_multiplicity for ps in plan.steps)


def _deficiency_sums(
    schedule: Schedule, topology: Topology
) -> tuple[Fraction, Fraction, Fraction]:
    """(sum of per-step max port fracs, max link fracs, max injection fracs)."""
    plan = _plan_for(schedule, topology)
    port = sum((ps.max_port_frac * ps.repeat for ps in plan.steps), Fraction(0))
    link = sum((ps.max_link_frac * ps.repeat for ps in plan.steps), Fraction(0))
    inj = sum((ps.max_inj_frac * ps.repeat for ps in plan.steps), Fraction(0))
    return port, link, inj
