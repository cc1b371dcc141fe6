"""Shared fixtures.

Schedules are cached for the whole session: the flow simulator memoizes its
routing plan per schedule object, so rebuilding the same schedule in every
test would redo the expensive routing work.
"""

import pytest

from swingsim import parse_topology
from swingsim.cli import build_schedule
from swingsim.netsim import CostParams

_TOPOLOGIES = {}
_SCHEDULES = {}


def _topology(spec):
    if spec not in _TOPOLOGIES:
        _TOPOLOGIES[spec] = parse_topology(spec)
    return _TOPOLOGIES[spec]


def _schedule(spec, algorithm, variant="-", n=0):
    key = (spec, algorithm, variant, n)
    if key not in _SCHEDULES:
        _SCHEDULES[key] = build_schedule(_topology(spec), algorithm, variant, n)
    return _SCHEDULES[key]


@pytest.fixture(scope="session")
def topo():
    """topo(spec) -> cached Topology."""
    return _topology


@pytest.fixture(scope="session")
def build():
    """build(spec, algorithm, variant="-", n=0) -> cached Schedule."""
    return _schedule


@pytest.fixture(scope="session")
def costs():
    """costs(spec) -> CostParams at the topology's link parameters."""
    return lambda spec: CostParams.from_topology(_topology(spec))
