"""Schedule intermediate representation.

A schedule is a list of synchronized steps; each step is a set of
point-to-point transfers. Payloads are either block sets (bandwidth-style
phases move named 1/p-sized blocks of a collective's share) or exact
fractions of the full vector (latency-style phases move whole partial
sums). Nothing here knows about wall-clock time or wires; netsim does.

Long regular stretches (the p-1 rotations of a ring phase, say) are stored
once with a repeat count plus, per sub-collective, a block permutation to
apply between repetitions. `expand_steps` unrolls that representation for
the verifier and for schedule dumps.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import IO, Iterator


class Phase(Enum):
    REDUCE_SCATTER = "reduce-scatter"
    ALLGATHER = "allgather"
    FULL_EXCHANGE = "full-exchange"


@dataclass(frozen=True, slots=True)
class BlockSet:
    """Subset of the `size` blocks of one sub-collective, as a bitmap."""

    bits: int
    size: int

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("block universe must be non-empty")
        if self.bits < 0 or self.bits >> self.size:
            raise ValueError(f"bitmap 0x{self.bits:x} does not fit {self.size} blocks")

    @classmethod
    def from_indices(cls, indices, size: int) -> "BlockSet":
        bits = 0
        for i in indices:
            if not 0 <= i < size:
                raise ValueError(f"block index {i} out of range for {size} blocks")
            bits |= 1 << i
        return cls(bits, size)

    @property
    def count(self) -> int:
        return self.bits.bit_count()

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.size) if self.bits >> i & 1)

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.size and bool(self.bits >> i & 1)

    def __bool__(self) -> bool:
        return self.bits != 0


@dataclass(frozen=True, slots=True)
class Transfer:
    """One directed message within a step.

    port is the sender's abstract injection port (2*dim + 0 for the
    nominally positive direction, 2*dim + 1 for negative); None marks the
    odd-node side exchanges, which are not bound to a port.
    contributions optionally restricts, as a node bitmask, whose input
    vectors ride along (fraction payloads only); None means all of the
    sender's current contributions.
    """

    src: int
    dst: int
    port: int | None
    payload: "BlockSet | Fraction"
    collective_id: int = 0
    contributions: int | None = None

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError(f"transfer from node {self.src} to itself")
        if isinstance(self.payload, BlockSet):
            if not self.payload:
                raise ValueError("block transfer carries no blocks")
        elif isinstance(self.payload, Fraction):
            if not 0 < self.payload <= 1:
                raise ValueError(f"fraction payload {self.payload} outside (0, 1]")
        else:
            raise TypeError(f"payload must be BlockSet or Fraction, got {type(self.payload)}")


@dataclass(slots=True)
class Step:
    index: int
    phase: Phase
    transfers: tuple[Transfer, ...]
    repeat: int = 1
    # per collective_id: permutation tuple mapping block b of repetition i
    # to block rotations[b] of repetition i+1
    rotations: dict[int, tuple[int, ...]] | None = None


@dataclass(frozen=True, eq=False)
class Schedule:
    algorithm: str
    variant: str
    p: int
    dims: tuple[int, ...]
    steps: tuple[Step, ...]
    num_blocks: int | None  # blocks per sub-collective, None for whole-vector schedules
    num_collectives: int = 1
    replicated: bool = False  # True: every sub-collective carries the full vector

    @property
    def num_dims(self) -> int:
        return len(self.dims)

    @property
    def share(self) -> Fraction:
        """Fraction of the vector owned by one sub-collective."""
        return Fraction(1, 1) if self.replicated else Fraction(1, self.num_collectives)

    @property
    def granule(self) -> int:
        """Smallest vector size (bytes) every payload divides evenly."""
        blocks = self.num_blocks if self.num_blocks else 1
        return blocks * (1 if self.replicated else self.num_collectives)


def transfer_fraction(schedule: Schedule, t: Transfer) -> Fraction:
    """Bytes this transfer puts on the wire, as an exact fraction of n."""
    if isinstance(t.payload, BlockSet):
        return schedule.share * Fraction(t.payload.count, t.payload.size)
    return schedule.share * t.payload


def count_steps(schedule: Schedule) -> int:
    return sum(s.repeat for s in schedule.steps)


def _rotate_bits(bits: int, perm: tuple[int, ...]) -> int:
    out = 0
    while bits:
        low = bits & -bits
        out |= 1 << perm[low.bit_length() - 1]
        bits ^= low
    return out


def expand_steps(schedule: Schedule) -> Iterator[Step]:
    """Unroll repeats, applying block rotations between repetitions."""
    index = 0
    for step in schedule.steps:
        transfers = step.transfers
        for rep in range(step.repeat):
            if rep:
                rotations = step.rotations or {}
                transfers = tuple(
                    Transfer(
                        t.src,
                        t.dst,
                        t.port,
                        BlockSet(_rotate_bits(t.payload.bits, rotations[t.collective_id]), t.payload.size)
                        if isinstance(t.payload, BlockSet) and t.collective_id in rotations
                        else t.payload,
                        t.collective_id,
                        t.contributions,
                    )
                    for t in transfers
                )
            yield Step(index, step.phase, transfers)
            index += 1


def validate(schedule: Schedule) -> None:
    """Raise ValueError on structural defects.

    Port rule: within one step, a (src, port) or (dst, port) pair may
    repeat only across sub-collectives whose transfers ride the same wire,
    i.e. share identical (src, dst, port); the same sub-collective may use
    a port once. Portless (side-pattern) transfers are exempt.
    """
    if schedule.p < 2:
        raise ValueError("schedule needs at least two nodes")
    for i, step in enumerate(schedule.steps):
        if step.index != i:
            raise ValueError(f"step indices must run 0..{len(schedule.steps) - 1}, found {step.index} at {i}")
        if step.repeat < 1:
            raise ValueError(f"step {i} has repeat {step.repeat}")
        if step.repeat > 1 and step.rotations is None and any(
            isinstance(t.payload, BlockSet) for t in step.transfers
        ):
            raise ValueError(f"step {i} repeats block transfers without rotations")
        if not step.transfers:
            raise ValueError(f"step {i} is empty")
        by_src_port: dict[tuple[int, int], tuple] = {}
        by_dst_port: dict[tuple[int, int], tuple] = {}
        seen: set[tuple] = set()
        for t in step.transfers:
            if not (0 <= t.src < schedule.p and 0 <= t.dst < schedule.p):
                raise ValueError(f"step {i}: transfer {t.src}->{t.dst} outside 0..{schedule.p - 1}")
            if not 0 <= t.collective_id < schedule.num_collectives:
                raise ValueError(f"step {i}: collective {t.collective_id} out of range")
            if isinstance(t.payload, BlockSet) and t.payload.size != schedule.num_blocks:
                raise ValueError(
                    f"step {i}: payload over {t.payload.size} blocks, schedule has {schedule.num_blocks}"
                )
            if t.port is None:
                continue
            if not 0 <= t.port < 2 * schedule.num_dims:
                raise ValueError(f"step {i}: port {t.port} out of range")
            wire = (t.src, t.dst, t.port)
            key = wire + (t.collective_id,)
            if key in seen:
                raise ValueError(f"step {i}: duplicate transfer {key}")
            seen.add(key)
            for table, slot in ((by_src_port, (t.src, t.port)), (by_dst_port, (t.dst, t.port))):
                if table.setdefault(slot, wire) != wire:
                    raise ValueError(
                        f"step {i}: port collision at {slot}: {table[slot]} vs {wire}"
                    )
        if step.rotations:
            for cid, perm in step.rotations.items():
                if schedule.num_blocks is None or sorted(perm) != list(range(schedule.num_blocks)):
                    raise ValueError(f"step {i}: rotation for collective {cid} is not a permutation")


def bytes_transmitted_per_node(schedule: Schedule, n: int) -> int:
    """Total bytes sent by the busiest node over the whole schedule."""
    if n <= 0:
        raise ValueError("vector size must be positive")
    if n % schedule.granule:
        raise ValueError(
            f"vector of {n} bytes is not divisible by the {schedule.granule}-byte granule"
        )
    sent: dict[int, Fraction] = {}
    for step in schedule.steps:
        for t in step.transfers:
            frac = transfer_fraction(schedule, t) * step.repeat
            sent[t.src] = sent.get(t.src, Fraction(0)) + frac
    best = max(sent.values(), default=Fraction(0)) * n
    assert best.denominator == 1
    return int(best)


def dump_schedule(schedule: Schedule, out: IO[str]) -> None:
    """Write one line per transfer: step,phase,collective_id,src,dst,port,payload.

    Payloads print as a hex block bitmap or as a rational fraction of n;
    portless transfers print '-'.
    """
    out.write("step,phase,collective_id,src,dst,port,payload\n")
    for step in expand_steps(schedule):
        for t in sorted(step.transfers, key=lambda t: (t.src, t.dst, t.collective_id)):
            if isinstance(t.payload, BlockSet):
                payload = f"0x{t.payload.bits:x}"
            else:
                payload = f"{t.payload.numerator}/{t.payload.denominator}"
            port = "-" if t.port is None else str(t.port)
            out.write(
                f"{step.index},{step.phase.value},{t.collective_id},{t.src},{t.dst},{port},{payload}\n"
            )
