"""Shared machinery for halving/doubling schedule builders.

The distance-halving allreduces (the swing pattern and recursive doubling,
single- or multi-port) all have the same skeleton: a reduce-scatter whose
per-step block sets come from a "who still needs what" recursion on each
dimension's ring, followed by an allgather that replays the reduce-scatter
edges backwards carrying the same blocks. Builders differ only in the peer
rule per ring. This module implements the skeleton once:

* per-dimension send/reach tables for an arbitrary peer rule,
* the round-robin dimension sequence that skips exhausted dimensions,
* assembly of multi-dimensional block sets as products of per-dimension
  factors,
* the fold wrapper that reduces a non-power-of-two node count to the
  nearest power of two with one pre- and one post-step.

Nothing here is specific to one algorithm; peer rules live with their
algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .schedule import BlockSet, Phase, Step, Transfer

# peer rule on one ring: (position, per-dimension step) -> (peer position,
# nominal direction of the move before wrap-around)
PeerRule = Callable[[int, int], tuple[int, int]]


def ceil_log2(x: int) -> int:
    if x < 1:
        raise ValueError(f"ceil_log2 of {x}")
    return (x - 1).bit_length()


def is_power_of_two(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class DimFlow:
    """Send/reach tables for one dimension's ring under one peer rule.

    send[a][s]: blocks (ring positions) node-coordinate a dispatches at its
    s-th step on this ring: the peer itself plus everything the peer passes
    on later. reach[a][h]: positions a's data spreads to using steps h and
    later; reach[a][L] is empty.
    """

    d: int
    L: int
    peers: tuple[tuple[tuple[int, int], ...], ...]
    send: tuple[tuple[int, ...], ...]
    reach: tuple[tuple[int, ...], ...]


def build_dimflow(d: int, L: int, peer: PeerRule, dedup: bool = False) -> DimFlow:
    """Tabulate a peer rule; dedup keeps only the last dispatch of a block.

    Dedup matters when d is even but not a power of two: the recursion then
    names some blocks at several steps, and only the final mention may
    actually send. The same pass also prunes a position's own block from its
    dispatches: block a's only final consumer is position a itself, so
    shipping a's partial out (it would only loop back) is pure overhead, and
    everything positions downstream accumulate for block a still drains to a
    through their own dispatches.
    """
    peers = [[peer(a, s) for s in range(L)] for a in range(d)]
    reach = [[0] * (L + 1) for _ in range(d)]
    for h in range(L - 1, -1, -1):
        for a in range(d):
            q = peers[a][h][0]
            reach[a][h] = (1 << q) | reach[q][h + 1] | reach[a][h + 1]
    send = [
        [(1 << peers[a][s][0]) | reach[peers[a][s][0]][s + 1] for s in range(L)]
        for a in range(d)
    ]
    if dedup:
        for a in range(d):
            seen = 1 << a
            for s in range(L - 1, -1, -1):
                send[a][s] &= ~seen
                seen |= send[a][s]
    return DimFlow(
        d,
        L,
        tuple(tuple(row) for row in peers),
        tuple(tuple(row) for row in send),
        tuple(tuple(row) for row in reach),
    )


def dim_sequence(steps_per_dim: Sequence[int], start_dim: int) -> list[tuple[int, int]]:
    """Visit dimensions round-robin from start_dim, skipping exhausted ones.

    Yields (dimension, per-dimension step) for each global step.
    """
    D = len(steps_per_dim)
    used = [0] * D
    total = sum(steps_per_dim)
    cursor = start_dim
    seq = []
    for _ in range(total):
        while used[cursor % D] >= steps_per_dim[cursor % D]:
            cursor += 1
        k = cursor % D
        seq.append((k, used[k]))
        used[k] += 1
        cursor += 1
    return seq


@dataclass(frozen=True)
class CollectiveDef:
    """One sub-collective: where its dimension round-robin starts and the
    (orientation-specific) flow tables for every dimension."""

    cid: int
    start_dim: int
    flows: tuple[DimFlow, ...]


def _strides(dims: Sequence[int]) -> list[int]:
    strides = []
    acc = 1
    for d in dims:
        strides.append(acc)
        acc *= d
    return strides


def embed_product(factors: Sequence[int], strides: Sequence[int]) -> int:
    """Bitmask over flat ranks of the product of per-dimension position sets."""
    acc = 1
    for factor, stride in zip(factors, strides):
        nxt = 0
        for v in iter_bits(factor):
            nxt |= acc << (v * stride)
        acc = nxt
    return acc


def _port(dim: int, nominal_sign: int) -> int:
    return 2 * dim + (0 if nominal_sign > 0 else 1)


def reversed_transfers(transfers: Iterable[Transfer]) -> tuple[Transfer, ...]:
    """The same wires run backwards: allgather mirrors of reduce-scatter edges."""
    return tuple(
        Transfer(
            t.dst,
            t.src,
            None if t.port is None else t.port ^ 1,
            t.payload,
            t.collective_id,
            t.contributions,
        )
        for t in transfers
    )


def halving_steps(
    lattice_dims: Sequence[int],
    num_blocks: int,
    colls: Sequence[CollectiveDef],
    extra_rs: dict[int, list[Transfer]] | None = None,
) -> list[Step]:
    """Reduce-scatter + mirrored allgather over a node lattice.

    Block indices are flat lattice ranks (block b ends fully reduced at
    node b). num_blocks may exceed the lattice size; the surplus block ids
    then belong to nodes outside the lattice and never move here (their
    traffic arrives via extra_rs, e.g. the odd-node side pattern).
    extra_rs maps step index -> transfers appended to that reduce-scatter
    step; the allgather mirrors them along with everything else.
    """
    D = len(lattice_dims)
    strides = _strides(lattice_dims)
    total_nodes = 1
    for d in lattice_dims:
        total_nodes *= d
    coords = []
    for rank in range(total_nodes):
        rest, coord = rank, []
        for d in lattice_dims:
            coord.append(rest % d)
            rest //= d
        coords.append(tuple(coord))
    L = sum(f.L for f in colls[0].flows)
    rs: list[list[Transfer]] = [[] for _ in range(L)]

    for coll in colls:
        seq = dim_sequence([f.L for f in coll.flows], coll.start_dim)
        used = [0] * D
        for s, (k, sg) in enumerate(seq):
            used[k] += 1
            flow_k = coll.flows[k]
            after = tuple(used)
            for rank in range(total_nodes):
                a = coords[rank]
                send_k = flow_k.send[a[k]][sg]
                if not send_k:
                    continue  # dedup may leave nothing to dispatch this step
                q_k, sign = flow_k.peers[a[k]][sg]
                factors = [
                    send_k
                    if j == k
                    else (1 << a[j]) | coll.flows[j].reach[a[j]][min(after[j], coll.flows[j].L)]
                    for j in range(D)
                ]
                mask = embed_product(factors, strides)
                dst = rank + (q_k - a[k]) * strides[k]
                rs[s].append(
                    Transfer(rank, dst, _port(k, sign), BlockSet(mask, num_blocks), coll.cid)
                )

    if extra_rs:
        for s, extras in extra_rs.items():
            rs[s].extend(extras)

    steps = [Step(s, Phase.REDUCE_SCATTER, tuple(ts)) for s, ts in enumerate(rs)]
    for u in range(L):
        steps.append(Step(L + u, Phase.ALLGATHER, reversed_transfers(rs[L - 1 - u])))
    return steps


def full_exchange_steps(
    lattice_dims: Sequence[int],
    colls: Sequence[CollectiveDef],
    contributions: dict[int, list[list[int]]] | None = None,
) -> list[Step]:
    """Whole-vector exchange: every node swaps its running partial sum with
    its peer each step. contributions optionally maps collective id to a
    [step][node] table of explicit contribution masks (needed when peer
    reach sets overlap, i.e. non-power-of-two rings)."""
    D = len(lattice_dims)
    strides = _strides(lattice_dims)
    total_nodes = 1
    for d in lattice_dims:
        total_nodes *= d
    L = sum(f.L for f in colls[0].flows)
    out: list[list[Transfer]] = [[] for _ in range(L)]
    for coll in colls:
        seq = dim_sequence([f.L for f in coll.flows], coll.start_dim)
        masks = contributions.get(coll.cid) if contributions else None
        for s, (k, sg) in enumerate(seq):
            flow_k = coll.flows[k]
            for rank in range(total_nodes):
                a_k = rank // strides[k] % lattice_dims[k]
                q_k, sign = flow_k.peers[a_k][sg]
                dst = rank + (q_k - a_k) * strides[k]
                out[s].append(
                    Transfer(
                        rank,
                        dst,
                        _port(k, sign),
                        Fraction(1),
                        coll.cid,
                        masks[s][rank] if masks is not None else None,
                    )
                )
    return [Step(s, Phase.FULL_EXCHANGE, tuple(ts)) for s, ts in enumerate(out)]


def wrap_fold(
    inner: list[Step], p: int, p_main: int, num_collectives: int
) -> list[Step]:
    """Sandwich a p_main-node schedule between fold steps for p nodes.

    Every node beyond the largest power of two pairs with its image
    p_main positions down: it folds its whole vector in before the main
    schedule and receives the finished result after it. Fold transfers are
    not bound to a port.
    """
    if p_main >= p:
        raise ValueError("fold needs surplus nodes")
    fold_in = tuple(
        Transfer(extra, extra - p_main, None, Fraction(1), cid)
        for extra in range(p_main, p)
        for cid in range(num_collectives)
    )
    fold_out = tuple(
        Transfer(extra - p_main, extra, None, Fraction(1), cid)
        for extra in range(p_main, p)
        for cid in range(num_collectives)
    )
    steps = [Step(0, Phase.FULL_EXCHANGE, fold_in)]
    for st in inner:
        steps.append(Step(st.index + 1, st.phase, st.transfers, st.repeat, st.rotations))
    steps.append(Step(len(steps), Phase.ALLGATHER, fold_out))
    return steps
