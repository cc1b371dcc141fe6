"""Symbolic schedule verification.

The verifier never touches payload bytes: it tracks, per node and per
block (or per node for whole-vector schedules), the SET of source nodes
whose input is folded into what that node currently holds, as a bitmask.
A schedule computes a correct allreduce exactly when every node ends up
holding, for every block of every sub-collective, each of the p sources
exactly once: a missing source is a lost contribution, an overlapping
merge is data aggregated twice (wrong for non-idempotent reductions).

Reads happen against the pre-step state, so transfers within one step are
simultaneous, matching the synchronized-step execution model.
"""

from __future__ import annotations

from dataclasses import dataclass

from .schedule import BlockSet, Phase, Schedule, expand_steps, validate


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    # (node, block, source, count): source's contribution to (node, block)
    # arrived `count` times; count 0 means missing, 2 means merged twice.
    # block is -1 for whole-vector schedules.
    problems: tuple[tuple[int, int, int, int], ...]
    duplicate_transmissions: int
    detail: str

    def __bool__(self) -> bool:
        return self.passed


_MAX_REPORTED = 32


class _Tracker:
    """Contribution masks for one sub-collective."""

    def __init__(self, p: int, num_blocks: int | None):
        self.full = (1 << p) - 1
        if num_blocks is None:
            self.vec = [1 << r for r in range(p)]
            self.held = None
        else:
            self.vec = None
            self.held = [[1 << r] * num_blocks for r in range(p)]
        self.problems: list[tuple[int, int, int, int]] = []
        self.duplicates = 0
        self._send_counts: dict[tuple[int, int], int] = {}
        self._recv_counts: dict[tuple[int, int], int] = {}

    def flag(self, node: int, block: int, mask: int, count: int) -> None:
        src = 0
        while mask and len(self.problems) < _MAX_REPORTED:
            if mask & 1:
                self.problems.append((node, block, src, count))
            mask >>= 1
            src += 1

    def merge_block(self, dst: int, block: int, mask: int) -> None:
        row = self.held[dst]
        overlap = row[block] & mask
        if overlap:
            self.flag(dst, block, overlap, 2)
        row[block] |= mask

    def copy_block(self, dst: int, block: int, mask: int) -> None:
        if mask != self.full:
            self.flag(dst, block, self.full & ~mask, 0)
        key = (dst, block)
        self._recv_counts[key] = self._recv_counts.get(key, 0) + 1
        if self._recv_counts[key] > 1:
            self.duplicates += 1
        self.held[dst][block] = mask

    def note_send(self, src: int, block: int) -> None:
        key = (src, block)
        self._send_counts[key] = self._send_counts.get(key, 0) + 1
        if self._send_counts[key] > 1:
            self.duplicates += 1


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _run(schedule: Schedule, p: int, reduce_scatter_only: bool) -> VerifyReport:
    if p != schedule.p:
        raise ValueError(f"schedule built for {schedule.p} nodes, asked to verify {p}")
    validate(schedule)
    block_mode = schedule.num_blocks is not None
    if reduce_scatter_only and not block_mode:
        raise ValueError("reduce-scatter verification needs a block-granular schedule")
    trackers = [_Tracker(p, schedule.num_blocks) for _ in range(schedule.num_collectives)]

    for step in expand_steps(schedule):
        if reduce_scatter_only and step.phase is Phase.ALLGATHER:
            break
        ag = step.phase is Phase.ALLGATHER

        # pass 1: snapshot everything that moves, before any state changes
        moves = []
        for t in step.transfers:
            tr = trackers[t.collective_id]
            if isinstance(t.payload, BlockSet):
                if not block_mode:
                    raise ValueError("block payload in a whole-vector schedule")
                cells = [(b, tr.held[t.src][b]) for b in _bits(t.payload.bits)]
            elif block_mode:
                # whole-vector transfer inside a block schedule: fold step
                cells = list(enumerate(tr.held[t.src]))
            else:
                sent = t.contributions if t.contributions is not None else tr.vec[t.src]
                if sent & ~tr.vec[t.src]:
                    tr.flag(t.src, -1, sent & ~tr.vec[t.src], 0)
                cells = [(-1, sent)]
            moves.append((t, tr, cells))

        # pass 2: apply
        for t, tr, cells in moves:
            for block, mask in cells:
                if not block_mode:
                    if ag:
                        if mask != tr.full:
                            tr.flag(t.dst, -1, tr.full & ~mask, 0)
                        tr.vec[t.dst] = mask
                    else:
                        overlap = tr.vec[t.dst] & mask
                        if overlap:
                            tr.flag(t.dst, -1, overlap, 2)
                        tr.vec[t.dst] |= mask
                elif ag:
                    tr.copy_block(t.dst, block, mask)
                else:
                    if isinstance(t.payload, BlockSet):
                        tr.note_send(t.src, block)
                        if mask == 0:
                            tr.problems.append((t.src, block, t.src, 0))
                    tr.merge_block(t.dst, block, mask)

        # senders relinquish dispatched blocks, so a resend shows up as empty
        if block_mode and not ag:
            for t, tr, cells in moves:
                if isinstance(t.payload, BlockSet):
                    for block, _ in cells:
                        tr.held[t.src][block] = 0

    problems: list[tuple[int, int, int, int]] = []
    duplicates = 0
    for tr in trackers:
        duplicates += tr.duplicates
        if block_mode:
            if reduce_scatter_only:
                owners = ((b, b) for b in range(schedule.num_blocks) if b < p)
            else:
                owners = ((r, b) for r in range(p) for b in range(schedule.num_blocks))
            for r, b in owners:
                if len(tr.problems) >= _MAX_REPORTED:
                    break
                missing = tr.full & ~tr.held[r][b]
                if missing:
                    tr.flag(r, b, missing, 0)
        else:
            for r in range(p):
                if len(tr.problems) >= _MAX_REPORTED:
                    break
                missing = tr.full & ~tr.vec[r]
                if missing:
                    tr.flag(r, -1, missing, 0)
        problems.extend(tr.problems)

    passed = not problems
    what = "reduce-scatter" if reduce_scatter_only else "allreduce"
    detail = (
        f"{what} ok: {p} nodes, {schedule.num_collectives} sub-collectives"
        if passed
        else f"{what} failed: {len(problems)} problem(s), e.g. (node, block, source, count) {problems[0]}"
    )
    return VerifyReport(passed, tuple(problems[:_MAX_REPORTED]), duplicates, detail)


def verify_allreduce(schedule: Schedule, p: int) -> VerifyReport:
    """Check that every node ends holding every source's input exactly once."""
    return _run(schedule, p, reduce_scatter_only=False)


def verify_reduce_scatter(schedule: Schedule, p: int) -> VerifyReport:
    """Check the reduce-scatter prefix: node b ends owning block b, fully reduced."""
    return _run(schedule, p, reduce_scatter_only=True)
