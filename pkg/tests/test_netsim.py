"""Flow-level cost model: routing, per-step times, goodput."""

from fractions import Fraction

import pytest

from swingsim.netsim import (
    CostParams,
    goodput,
    max_link_multiplicity,
    route_step,
    simulate,
)
from swingsim.schedule import expand_steps, transfer_fraction


def test_cost_params_from_topology(topo):
    cp = CostParams.from_topology(topo("torus:8"))
    assert cp.alpha_link == 100
    assert cp.alpha_proc == 300
    assert cp.alpha_mesh == 25
    assert cp.beta == Fraction(8, 400)


def test_cost_params_track_bandwidth_overrides():
    from swingsim.topology import parse_topology

    fast = parse_topology("torus:8", link_bandwidth_gbps=800)
    assert CostParams.from_topology(fast).beta == Fraction(1, 100)


def test_ring_time_anchor(build, topo, costs):
    result = simulate(build("torus:4", "ring", "-"), topo("torus:4"), costs("torus:4"), 64)
    assert result.total_time == Fraction(60024, 25)
    assert result.effective_n == 64
    assert goodput(result) == pytest.approx(0.21324803411968546)


def test_goodput_is_bits_over_time(build, topo, costs):
    result = simulate(build("torus:4", "ring", "-"), topo("torus:4"), costs("torus:4"), 640)
    assert goodput(result) == pytest.approx(640 * 8 / float(result.total_time))


def test_sizes_round_up_to_the_granule(build, topo, costs):
    schedule = build("torus:4", "ring", "-")
    result = simulate(schedule, topo("torus:4"), costs("torus:4"), 1)
    assert schedule.granule == 8
    assert result.effective_n == 8


def test_time_is_monotone_in_size(build, topo, costs):
    schedule = build("torus:4x4", "swing", "bandwidth-optimal")
    t = topo("torus:4x4")
    cp = costs("torus:4x4")
    times = [simulate(schedule, t, cp, n).total_time for n in (64, 640, 6400)]
    assert times[0] < times[1] < times[2]


def test_total_time_is_the_sum_of_steps(build, topo, costs):
    result = simulate(
        build("torus:4x4", "swing", "bandwidth-optimal"),
        topo("torus:4x4"),
        costs("torus:4x4"),
        64,
    )
    assert len(result.per_step) == 8
    assert sum(c.time for c in result.per_step) == result.total_time


def test_two_nodes_all_algorithms_coincide(build, topo, costs):
    """With p = 2 every algorithm degenerates to the same single exchange."""
    t = topo("torus:2")
    cp = costs("torus:2")
    a = simulate(build("torus:2", "swing", "bandwidth-optimal"), t, cp, 1024)
    b = simulate(build("torus:2", "recdoub", "bandwidth-optimal"), t, cp, 1024)
    assert a.total_time == b.total_time == Fraction(20256, 25)


@pytest.mark.parametrize(
    "spec,algorithm,variant,expected",
    [
        ("torus:8", "ring", "-", 1.0),
        ("torus:16", "recdoub", "bandwidth-optimal", 4.0),
        ("torus:8x8", "swing", "bandwidth-optimal", 3.0),
        ("torus:4x4", "bucket", "-", 1.0),
    ],
)
def test_link_multiplicity_anchors(build, topo, spec, algorithm, variant, expected):
    schedule = build(spec, algorithm, variant)
    assert max_link_multiplicity(schedule, topo(spec)) == expected


def test_routed_load_conserves_bytes(build, topo):
    """Every transferred byte lands on exactly hop-count links."""
    spec = "torus:8"
    t = topo(spec)
    schedule = build(spec, "swing", "bandwidth-optimal")
    n = 1024
    for step in list(expand_steps(schedule))[:3]:
        loads = route_step(step, t, n, schedule.share)
        expected = sum(
            transfer_fraction(schedule, tr) * n * len(t.minimal_paths(tr.src, tr.dst)[0])
            for tr in step.transfers
        )
        assert sum(loads.values()) == expected


def test_first_step_load_anchor(build, topo):
    schedule = build("torus:8", "swing", "bandwidth-optimal")
    loads = route_step(schedule.steps[0], topo("torus:8"), 1024, schedule.share)
    assert sum(loads.values()) == 4096
    assert len(loads) == 16
    assert max(loads.values()) == 256
