"""Baseline allreduce schedules: ring, recursive doubling, and bucket.

* ring: one ring allreduce per port over edge-disjoint Hamiltonian cycles
  (1D: the two ring directions; 2D: a row-snake cycle and its complement,
  each in both directions). 2(p-1) neighbor-only steps.
* recursive doubling: XOR peers with per-dimension distance doubling,
  round-robin over dimensions. Latency-optimal (whole-vector), bandwidth-
  optimal (reduce-scatter + allgather), and the mirrored multiport variant
  that runs 2D concurrent sub-collectives like the swing multiport scheme.
  Non-power-of-two 1D node counts fold the surplus into the largest power
  of two at the cost of two extra steps.
* bucket: per-dimension ring reduce-scatters then allgathers, 2D
  concurrent instances offset in starting dimension and direction; phases
  are synchronized across instances to the largest dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from . import blockflow
from .blockflow import CollectiveDef, ceil_log2, is_power_of_two
from .schedule import BlockSet, Phase, Schedule, Step, Transfer
from .topology import Topology


class BaselineAlgorithm(Enum):
    RING = "ring"
    RECDOUB_LATENCY = "recdoub-latency"
    RECDOUB_BANDWIDTH = "recdoub-bandwidth"
    RECDOUB_MIRRORED = "recdoub-mirrored"
    BUCKET = "bucket"


@dataclass(frozen=True)
class BaselineParams:
    algorithm: BaselineAlgorithm


def build_baseline(topology: Topology, params: BaselineParams, n: int) -> Schedule:
    builder = {
        BaselineAlgorithm.RING: build_ring,
        BaselineAlgorithm.RECDOUB_LATENCY: build_recdoub_latency,
        BaselineAlgorithm.RECDOUB_BANDWIDTH: build_recdoub_bandwidth,
        BaselineAlgorithm.RECDOUB_MIRRORED: build_recdoub_mirrored,
        BaselineAlgorithm.BUCKET: build_bucket,
    }[params.algorithm]
    return builder(topology, n)


def _finish(schedule: Schedule, n: int) -> Schedule:
    if n % schedule.granule:
        raise ValueError(
            f"vector of {n} bytes is not divisible by the {schedule.granule}-byte granule"
        )
    return schedule


# ---------------------------------------------------------------- ring ---


def _snake_cycles(C: int, R: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Two edge-disjoint Hamiltonian cycles on a C x R torus (C | R,
    gcd(R, C-1) = 1), as (col, row) sequences.

    Cycle A snakes each row from a start column that shifts by -1 per row;
    cycle B runs down columns, crossing over on the horizontal edges A
    skipped.
    """
    a = [((i - y) % C, y) for y in range(R) for i in range(C)]
    b = []
    x, y = 0, 0
    for _ in range(C * R):
        b.append((x, y))
        if (x + y + 1) % C == 0:  # this node starts the row's skipped edge
            x = (x + 1) % C
        else:
            y = (y + 1) % R
    if (x, y) != (0, 0):
        raise ValueError(f"complement walk on {C}x{R} does not close into one cycle")
    return a, b


def _check_cycles(topology: Topology, cycles: list[list[int]]) -> None:
    # A size-2 dimension has two parallel cables between a node pair (direct
    # and wraparound), so such a pair may appear in both cycles; any other
    # pair has one cable and must stay exclusive to one cycle.
    p = topology.num_nodes
    uses: dict[frozenset[int], int] = {}
    for cycle in cycles:
        if len(cycle) != p or len(set(cycle)) != p:
            raise ValueError("cycle construction failed to visit every node once")
        for j, u in enumerate(cycle):
            v = cycle[(j + 1) % p]
            du = [
                min((cu - cv) % d, (cv - cu) % d)
                for cu, cv, d in zip(topology.coord_of(u), topology.coord_of(v), topology.dims)
            ]
            if sum(du) != 1:
                raise ValueError("cycle construction produced a non-neighbor edge")
            cables = 2 if topology.dims[du.index(1)] == 2 else 1
            edge = frozenset((u, v))
            uses[edge] = uses.get(edge, 0) + 1
            if uses[edge] > cables:
                raise ValueError("cycle construction reused an edge")


def build_ring(topology: Topology, n: int) -> Schedule:
    """Ring allreduce: 2D rings on n/2D bytes each, 2(p-1) steps total.

    2D tori need cols | rows and gcd(rows, cols-1) = 1 in one orientation
    or the other; higher dimensions are not supported.
    """
    dims = topology.dims
    p = topology.num_nodes
    if len(dims) > 2:
        raise ValueError(f"ring supports 1D and 2D tori, not {len(dims)}D")
    if len(dims) == 1:
        cycles = [list(range(p))]
    else:
        d0, d1 = dims
        if d1 % d0 == 0 and math.gcd(d1, d0 - 1) == 1:
            ab = _snake_cycles(d0, d1)
            cycles = [[x + y * d0 for x, y in cyc] for cyc in ab]
        elif d0 % d1 == 0 and math.gcd(d0, d1 - 1) == 1:
            ab = _snake_cycles(d1, d0)
            cycles = [[y + x * d0 for x, y in cyc] for cyc in ab]
        else:
            raise ValueError(
                f"no edge-disjoint Hamiltonian cycle pair for {d0}x{d1}: "
                "need cols dividing rows with gcd(rows, cols-1) = 1"
            )
        _check_cycles(topology, cycles)

    rs_transfers, ag_transfers, rotations = [], [], {}
    for cid_pair, cycle in enumerate(cycles):
        for direction, seq in ((0, cycle), (1, cycle[::-1])):
            cid = 2 * cid_pair + direction
            perm = [0] * p
            for i, node in enumerate(seq):
                perm[node] = seq[i - 1]
            rotations[cid] = tuple(perm)
            for j, src in enumerate(seq):
                dst = seq[(j + 1) % p]
                rs_transfers.append(
                    Transfer(src, dst, cid, BlockSet(1 << seq[j - 1], p), cid)
                )
                ag_transfers.append(Transfer(src, dst, cid, BlockSet(1 << src, p), cid))

    steps = (
        Step(0, Phase.REDUCE_SCATTER, tuple(rs_transfers), repeat=p - 1, rotations=dict(rotations)),
        Step(1, Phase.ALLGATHER, tuple(ag_transfers), repeat=p - 1, rotations=dict(rotations)),
    )
    return _finish(
        Schedule(
            algorithm="ring",
            variant="-",
            p=p,
            dims=dims,
            steps=steps,
            num_blocks=p,
            num_collectives=2 * len(cycles),
        ),
        n,
    )


# ---------------------------------------------- recursive doubling ---


def _xor_rule(d: int, mirrored: bool) -> blockflow.PeerRule:
    def rule(a: int, s: int) -> tuple[int, int]:
        move = 1 << s
        if a & move:
            move = -move
        if mirrored:
            move = -move
        return (a + move) % d, (1 if move > 0 else -1)

    return rule


@lru_cache(maxsize=None)
def _xor_flow(d: int, mirrored: bool) -> blockflow.DimFlow:
    return blockflow.build_dimflow(d, ceil_log2(d), _xor_rule(d, mirrored))


def _recdoub_lattice(topology: Topology) -> tuple[tuple[int, ...], int | None]:
    """(power-of-two lattice the exchange runs on, folded total p or None)."""
    dims = topology.dims
    if len(dims) > 1:
        for d in dims:
            if not is_power_of_two(d):
                raise ValueError(
                    f"unsupported shape {'x'.join(map(str, dims))}: multi-dimensional "
                    "recursive doubling needs power-of-two dimensions"
                )
        return dims, None
    p = dims[0]
    if is_power_of_two(p):
        return dims, None
    return (1 << (p.bit_length() - 1),), p


def _recdoub_collectives(lattice: tuple[int, ...], multiport: bool) -> list[CollectiveDef]:
    D = len(lattice)
    plain = tuple(_xor_flow(d, False) for d in lattice)
    if not multiport:
        return [CollectiveDef(0, 0, plain)]
    mirrored = tuple(_xor_flow(d, True) for d in lattice)
    return [CollectiveDef(c, c, plain) for c in range(D)] + [
        CollectiveDef(D + c, c, mirrored) for c in range(D)
    ]


def build_recdoub_latency(topology: Topology, n: int) -> Schedule:
    """Single-port whole-vector recursive doubling: log2 p steps (+2 fold)."""
    lattice, folded = _recdoub_lattice(topology)
    colls = _recdoub_collectives(lattice, multiport=False)
    steps = blockflow.full_exchange_steps(lattice, colls)
    if folded:
        steps = blockflow.wrap_fold(steps, folded, math.prod(lattice), 1)
    return _finish(
        Schedule(
            algorithm="recdoub",
            variant="latency-optimal",
            p=topology.num_nodes,
            dims=topology.dims,
            steps=tuple(steps),
            num_blocks=None,
        ),
        n,
    )


def build_recdoub_bandwidth(topology: Topology, n: int) -> Schedule:
    """Single-port halving/doubling recursive doubling: 2 log2 p steps (+2 fold)."""
    lattice, folded = _recdoub_lattice(topology)
    blocks = math.prod(lattice)
    colls = _recdoub_collectives(lattice, multiport=False)
    steps = blockflow.halving_steps(lattice, blocks, colls)
    if folded:
        steps = blockflow.wrap_fold(steps, folded, blocks, 1)
    return _finish(
        Schedule(
            algorithm="recdoub",
            variant="bandwidth-optimal",
            p=topology.num_nodes,
            dims=topology.dims,
            steps=tuple(steps),
            num_blocks=blocks,
        ),
        n,
    )


def build_recdoub_mirrored(topology: Topology, n: int) -> Schedule:
    """Multiport recursive doubling: 2D concurrent halving/doubling
    sub-collectives with the plain/mirrored port scheme."""
    lattice, folded = _recdoub_lattice(topology)
    blocks = math.prod(lattice)
    colls = _recdoub_collectives(lattice, multiport=True)
    steps = blockflow.halving_steps(lattice, blocks, colls)
    if folded:
        steps = blockflow.wrap_fold(steps, folded, blocks, len(colls))
    return _finish(
        Schedule(
            algorithm="recdoub",
            variant="mirrored",
            p=topology.num_nodes,
            dims=topology.dims,
            steps=tuple(steps),
            num_blocks=blocks,
            num_collectives=len(colls),
        ),
        n,
    )


# -------------------------------------------------------------- bucket ---


def build_bucket(topology: Topology, n: int) -> Schedule:
    """Bucket allreduce: D ring reduce-scatter phases then D ring allgather
    phases, one dimension at a time, with 2D concurrent instances offset in
    starting dimension and direction.

    Instances switch dimensions in lockstep, so every phase spans
    d_max - 1 repetitions and instances on smaller dimensions idle at the
    tail; total steps 2D(d_max - 1).
    """
    dims = topology.dims
    D = len(dims)
    p = topology.num_nodes
    if D < 2:
        raise ValueError("bucket needs at least 2 dimensions; use ring on 1D")
    strides = []
    acc = 1
    for d in dims:
        strides.append(acc)
        acc *= d
    full = [(1 << d) - 1 for d in dims]
    coords = [tuple((r // strides[k]) % dims[k] for k in range(D)) for r in range(p)]
    instances = [(k, dirbit) for k in range(D) for dirbit in (0, 1)]

    def perm_for(w: int, direction: int) -> tuple[int, ...]:
        return tuple(
            b + (((coords[b][w] - direction) % dims[w]) - coords[b][w]) * strides[w]
            for b in range(p)
        )

    steps: list[Step] = []
    for j in range(2 * D):
        rs = j < D
        inst_dim = {
            (k, dirbit): (k + (j if rs else 2 * D - 1 - j)) % D for k, dirbit in instances
        }
        marks = sorted({dims[w] - 1 for w in inst_dim.values()})
        prev = 0
        for mark in marks:
            if mark <= prev:
                continue
            transfers = []
            rotations = {}
            for (k, dirbit), w in inst_dim.items():
                if dims[w] - 1 <= prev:
                    continue  # this instance already finished the phase
                direction = 1 if dirbit == 0 else -1
                cid = 2 * k + dirbit
                rotations[cid] = perm_for(w, direction)
                phase_no = j if rs else j - D
                for r in range(p):
                    a = coords[r]
                    offset = prev + 1 if rs else prev
                    g = (a[w] - direction * offset) % dims[w]
                    factors = []
                    for u in range(D):
                        if u == w:
                            factors.append(1 << g)
                        elif rs:
                            done = (u - k) % D < phase_no
                            factors.append(1 << a[u] if done else full[u])
                        else:
                            gathered = (k + D - 1 - u) % D < phase_no
                            factors.append(full[u] if gathered else 1 << a[u])
                    mask = blockflow.embed_product(factors, strides)
                    dst = r + (((a[w] + direction) % dims[w]) - a[w]) * strides[w]
                    transfers.append(
                        Transfer(
                            r,
                            dst,
                            2 * w + (0 if direction > 0 else 1),
                            BlockSet(mask, p),
                            cid,
                        )
                    )
            steps.append(
                Step(
                    len(steps),
                    Phase.REDUCE_SCATTER if rs else Phase.ALLGATHER,
                    tuple(transfers),
                    repeat=mark - prev,
                    rotations=rotations,
                )
            )
            prev = mark
    return _finish(
        Schedule(
            algorithm="bucket",
            variant="-",
            p=p,
            dims=dims,
            steps=tuple(steps),
            num_blocks=p,
            num_collectives=2 * D,
        ),
        n,
    )
