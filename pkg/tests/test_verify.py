"""Correctness checker: reduction coverage, duplicates, fault detection."""

import dataclasses

import pytest

from swingsim.cli import _drop_transfer
from swingsim.schedule import Step
from swingsim.verify import verify_allreduce, verify_reduce_scatter


def test_reports_are_truthy_when_clean(build, topo):
    schedule = build("torus:4x4", "swing", "bandwidth-optimal")
    report = verify_allreduce(schedule, 16)
    assert report
    assert report.passed
    assert report.problems == ()
    assert report.duplicate_transmissions == 0


def test_reduce_scatter_prefix_also_verifies(build):
    schedule = build("torus:4x4", "swing", "bandwidth-optimal")
    assert verify_reduce_scatter(schedule, 16)


def test_dropped_transfer_is_detected(build):
    schedule = build("torus:4x4", "swing", "bandwidth-optimal")
    broken = _drop_transfer(schedule, 0)
    report = verify_allreduce(broken, 16)
    assert not report
    assert report.problems
    # every problem names the node, the block, the missing source, and the count
    for node, block, source, count in report.problems:
        assert 0 <= node < 16
        assert 0 <= block < 16
        assert 0 <= source < 16
        assert count == 0
    assert report.detail.startswith("allreduce failed")


@pytest.mark.parametrize("drop", [3, 17, 40])
def test_any_single_fault_is_detected(build, drop):
    schedule = build("torus:2x4", "swing", "bandwidth-optimal")
    assert not verify_allreduce(_drop_transfer(schedule, drop), 8)


def test_resent_blocks_count_as_duplicates(build):
    schedule = build("torus:4x4", "swing", "bandwidth-optimal")
    first = schedule.steps[0]
    again = Step(len(schedule.steps), first.phase, first.transfers, 1, None)
    noisy = dataclasses.replace(schedule, steps=schedule.steps + (again,))
    report = verify_allreduce(noisy, 16)
    assert not report
    assert report.duplicate_transmissions > 0


def test_baselines_verify_end_to_end(build, topo):
    for spec, algorithm, variant in [
        ("torus:8", "ring", "-"),
        ("torus:2x4", "ring", "-"),
        ("torus:12", "recdoub", "latency-optimal"),
        ("torus:4x6", "bucket", "-"),
    ]:
        schedule = build(spec, algorithm, variant)
        assert verify_allreduce(schedule, topo(spec).num_nodes)
