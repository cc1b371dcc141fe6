"""Swing allreduce schedule construction.

At step s of the 1D algorithm, node r exchanges with the node rho(s)
positions away, where rho(s) = sum of (-2)^i for i in [0, s]. Even ranks
move one way, odd ranks the other, so the pairing is an involution and the
travelled distances go 1, 1, 3, 5, 11, ... instead of recursive doubling's
1, 2, 4, 8. Shorter hops on a torus mean less link sharing once the
schedule is routed.

Two variants:

* bandwidth-optimal: reduce-scatter then allgather, payload halving each
  reduce-scatter step, block sets from the dispatch recursion in
  rs_block_indices;
* latency-optimal: every step swaps whole running vectors, finishing in
  half the steps at higher byte cost.

Multi-dimensional tori run 2D concurrent sub-collectives (one plain and
one direction-flipped per starting dimension), one per port. Even
non-power-of-two node counts elide duplicate block dispatches; odd node
counts run the algorithm on p-1 nodes while the leftover node feeds its
blocks in from the side (bandwidth variant) or folds into node 0 (latency
variant).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

from . import blockflow
from .blockflow import CollectiveDef, ceil_log2, is_power_of_two
from .schedule import BlockSet, Schedule, Transfer
from .topology import Topology


def rho(s: int) -> int:
    """Signed swing distance: alternating sum 1 - 2 + 4 - ... up to (-2)^s."""
    if s < 0:
        raise ValueError(f"step index {s} is negative")
    return (1 - (-2) ** (s + 1)) // 3


def delta(s: int) -> int:
    """Absolute swing distance at step s; bounded by 2^s, strictly below for s > 1."""
    return abs(rho(s))


def pi(r: int, s: int, p: int) -> int:
    """Peer of rank r at step s on an even-sized ring of p nodes."""
    if p % 2:
        raise ValueError(f"peer function needs an even node count, got {p}")
    if not 0 <= r < p:
        raise ValueError(f"rank {r} out of range for {p} nodes")
    move = rho(s) if r % 2 == 0 else -rho(s)
    return (r + move) % p


def omega(s: int, D: int) -> int:
    """Dimension touched at step s on a square D-dimensional torus."""
    if s < 0 or D < 1:
        raise ValueError("need s >= 0 and D >= 1")
    return s % D


def sigma(s: int, D: int) -> int:
    """Per-dimension step index corresponding to global step s (square tori)."""
    if s < 0 or D < 1:
        raise ValueError("need s >= 0 and D >= 1")
    return s // D


def _swing_rule(d: int, flip: bool) -> blockflow.PeerRule:
    def rule(a: int, s: int) -> tuple[int, int]:
        move = rho(s) if a % 2 == 0 else -rho(s)
        if flip:
            move = -move
        return (a + move) % d, (1 if move > 0 else -1)

    return rule


@lru_cache(maxsize=None)
def _flow(d: int, flip: bool, dedup: bool) -> blockflow.DimFlow:
    return blockflow.build_dimflow(d, ceil_log2(d), _swing_rule(d, flip), dedup)


def peer_multidim(
    coord: tuple[int, ...],
    s: int,
    dims: tuple[int, ...],
    direction_flip: bool = False,
    start_dim: int = 0,
) -> tuple[int, ...]:
    """Peer coordinate at global step s on a power-of-two torus.

    Dimensions are visited round-robin from start_dim, skipping ones whose
    log2(d) steps are spent.
    """
    for d in dims:
        if not is_power_of_two(d):
            raise ValueError(f"dimension sizes must be powers of two, got {dims}")
    if len(coord) != len(dims) or any(not 0 <= c < d for c, d in zip(coord, dims)):
        raise ValueError(f"coordinate {coord} invalid for dims {dims}")
    seq = blockflow.dim_sequence([ceil_log2(d) for d in dims], start_dim)
    if s >= len(seq):
        raise ValueError(f"step {s} exceeds the {len(seq)} active steps of {dims}")
    k, sg = seq[s]
    peer, _ = _swing_rule(dims[k], direction_flip)(coord[k], sg)
    return tuple(peer if j == k else c for j, c in enumerate(coord))


def rs_block_indices(r: int, step: int, p: int) -> BlockSet:
    """Blocks rank r dispatches at a reduce-scatter step on a power-of-two ring.

    The dispatch set is the peer plus every position the peer spreads to in
    later steps; its size is p / 2^(step+1).
    """
    if not is_power_of_two(p):
        raise ValueError(f"node count {p} is not a power of two")
    L = ceil_log2(p)
    if not 0 <= step <= L:
        raise ValueError(f"step {step} out of range for {p} nodes")
    if not 0 <= r < p:
        raise ValueError(f"rank {r} out of range for {p} nodes")
    if step == L:
        return BlockSet(0, p)
    return BlockSet(_flow(p, False, False).send[r][step], p)


class Variant(Enum):
    LATENCY_OPTIMAL = "latency-optimal"
    BANDWIDTH_OPTIMAL = "bandwidth-optimal"


class LatencyMultiportMode(Enum):
    """Whole-vector multiport can shard the vector across the 2D concurrent
    sub-collectives or replicate it on every one. Replication burns bandwidth
    for no byte savings but keeps every port busy with the full payload."""

    SHARDED = "sharded"
    REPLICATED = "replicated"


@dataclass(frozen=True)
class SwingParams:
    variant: Variant = Variant.BANDWIDTH_OPTIMAL
    multiport: bool = True
    latency_multiport_mode: LatencyMultiportMode = LatencyMultiportMode.REPLICATED


def _collectives(dims: tuple[int, ...], multiport: bool, dedup: bool) -> list[CollectiveDef]:
    D = len(dims)
    flows = {
        flip: tuple(_flow(d, flip, dedup and not is_power_of_two(d)) for d in dims)
        for flip in (False, True)
    }
    if not multiport:
        return [CollectiveDef(0, 0, flows[False])]
    plain = [CollectiveDef(c, c, flows[False]) for c in range(D)]
    mirrored = [CollectiveDef(D + c, c, flows[True]) for c in range(D)]
    return plain + mirrored


def _side_groups(q: int, L: int) -> list[range]:
    """Main-node ranks the odd leftover node contacts at each step: the
    lowest q/2^(s+1) not yet contacted, rounded up, remainder on the last."""
    groups, nxt = [], 0
    for s in range(L):
        cnt = q - nxt if s == L - 1 else min(q - nxt, -(-q // (1 << (s + 1))))
        groups.append(range(nxt, nxt + cnt))
        nxt += cnt
    return groups


def _exchange_masks(
    d: int, L: int, flip: bool, num_blocks: int, seed_extra: int | None = None
) -> list[list[int]]:
    """Per-step, per-node contribution masks for whole-vector exchanges.

    Simulates the running partial-sum sets; each transfer contributes what
    the sender has that the receiver lacks. seed_extra marks an extra block
    id folded into node 0 before the exchange starts.
    """
    rule = _swing_rule(d, flip)
    have = [1 << r for r in range(d)]
    if seed_extra is not None:
        have[0] |= 1 << seed_extra
    masks: list[list[int]] = []
    for s in range(L):
        snap = list(have)
        row = []
        for r in range(d):
            q = rule(r, s)[0]
            row.append(snap[r] & ~snap[q])
            have[r] = snap[r] | snap[q]
        masks.append(row)
    return masks


def _build_bandwidth(dims: tuple[int, ...], p: int, multiport: bool) -> list:
    if len(dims) == 1 and dims[0] % 2:
        q = dims[0] - 1
        side = dims[0] - 1
        colls = _collectives((q,), multiport, dedup=True)
        L = ceil_log2(q)
        extra_rs: dict[int, list[Transfer]] = {}
        for s, group in enumerate(_side_groups(q, L)):
            ts = []
            for v in group:
                for coll in colls:
                    ts.append(Transfer(side, v, None, BlockSet(1 << v, p), coll.cid))
                    ts.append(Transfer(v, side, None, BlockSet(1 << side, p), coll.cid))
            if ts:
                extra_rs[s] = ts
        return blockflow.halving_steps((q,), p, colls, extra_rs)
    colls = _collectives(dims, multiport, dedup=True)
    return blockflow.halving_steps(dims, p, colls)


def _build_latency(dims: tuple[int, ...], p: int, multiport: bool) -> list:
    odd = len(dims) == 1 and dims[0] % 2 == 1
    lattice = (dims[0] - 1,) if odd else dims
    colls = _collectives(lattice, multiport, dedup=False)
    contributions = None
    if len(lattice) == 1 and (odd or not is_power_of_two(lattice[0])):
        d = lattice[0]
        L = ceil_log2(d)
        seed = p - 1 if odd else None
        contributions = {
            coll.cid: _exchange_masks(d, L, coll.cid >= len(lattice), p, seed)
            for coll in colls
        }
    steps = blockflow.full_exchange_steps(lattice, colls, contributions)
    if odd:
        steps = blockflow.wrap_fold(steps, p, p - 1, len(colls))
    return steps


def build_swing(topology: Topology, params: SwingParams, n: int) -> Schedule:
    """Swing schedule for an n-byte allreduce on a torus.

    Multi-dimensional shapes need power-of-two dimensions; 1D rings take
    any p >= 2. n must divide evenly into the schedule's block granule.
    """
    dims = topology.dims
    D = len(dims)
    p = topology.num_nodes
    if D > 1:
        for d in dims:
            if not is_power_of_two(d):
                raise ValueError(
                    f"unsupported shape {'x'.join(map(str, dims))}: "
                    "multi-dimensional swing needs power-of-two dimensions"
                )
    if params.variant is Variant.BANDWIDTH_OPTIMAL:
        steps = _build_bandwidth(dims, p, params.multiport)
        num_blocks: int | None = p
        replicated = False
    else:
        steps = _build_latency(dims, p, params.multiport)
        num_blocks = None
        replicated = (
            params.multiport
            and params.latency_multiport_mode is LatencyMultiportMode.REPLICATED
        )
    schedule = Schedule(
        algorithm="swing",
        variant=params.variant.value,
        p=p,
        dims=dims,
        steps=tuple(steps),
        num_blocks=num_blocks,
        num_collectives=2 * D if params.multiport else 1,
        replicated=replicated,
    )
    if n % schedule.granule:
        raise ValueError(
            f"vector of {n} bytes is not divisible by the {schedule.granule}-byte granule"
        )
    return schedule
