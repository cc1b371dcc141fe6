"""Deficiency metrics and closed-form congestion predictions.

An allreduce needs at least log2 p steps, moves at least 2n(p-1)/p bytes
through each node, and ideally loads no wire beyond what the busiest port
injects. The three eta factors measure how far a schedule sits from each
bound; the predicted_* functions evaluate the corresponding closed-form
sums for swing and recursive doubling so measured values can be checked
against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .baselines import build_recdoub_bandwidth, build_recdoub_latency
from .blockflow import is_power_of_two
from .netsim import CostParams, _deficiency_sums, simulate
from .schedule import Schedule, count_steps
from .swing import SwingParams, Variant, build_swing, delta
from .topology import Topology


@dataclass(frozen=True)
class DeficiencyReport:
    eta_l: float  # steps taken / log2 p
    eta_b: float  # busiest-port bytes / (n (p-1) / (D p))
    eta_c: float  # busiest-wire bytes / busiest-injection-wire bytes


def deficiencies(schedule: Schedule, topology: Topology, n: int = 0) -> DeficiencyReport:
    """Measured deficiencies; ratios of exact per-step fractions of n, so
    the result does not depend on n."""
    if n < 0:
        raise ValueError(f"vector size {n} is negative")
    p = schedule.p
    D = len(topology.dims)
    port_sum, link_sum, inj_sum = _deficiency_sums(schedule, topology)
    eta_l = count_steps(schedule) / math.log2(p)
    eta_b = float(port_sum * Fraction(D * p, p - 1))
    eta_c = float(link_sum / inj_sum) if inj_sum else 1.0
    return DeficiencyReport(eta_l=eta_l, eta_b=eta_b, eta_c=eta_c)


def _root_of(D: int, p: int) -> int:
    """Integer a with a**D == p, a a power of two; ValueError otherwise."""
    guess = round(p ** (1.0 / D))
    for a in (guess - 1, guess, guess + 1):
        if a > 0 and a**D == p:
            if not is_power_of_two(a):
                break
            return a
    raise ValueError(f"p={p} is not a D-th power of a power of two for D={D}")


def predicted_swing_congestion(D: int, p: int) -> float:
    """Closed-form congestion deficiency of bandwidth-optimal swing on a
    square DxD...x D torus of p = a^D nodes: sum of delta(s // D) / 2^(s+1)
    over all D log2 a steps. Grows with p toward a finite limit
    (about 1.19 for D=2, 1.03 for D=3, 1.008 for D=4)."""
    a = _root_of(D, p)
    steps = D * (a.bit_length() - 1)
    return float(sum(Fraction(delta(s // D), 1 << (s + 1)) for s in range(steps)))


def _predicted_recdoub_congestion(D: int, p: int) -> float:
    """Same sum with recursive doubling's 2^s distances in place of delta."""
    a = _root_of(D, p)
    steps = D * (a.bit_length() - 1)
    return float(sum(Fraction(1 << (s // D), 1 << (s + 1)) for s in range(steps)))


def xi_q(d_min: int, d_max: int, D: int) -> float:
    """Extra congestion deficiency a rectangular torus pays over the square
    one: log2(d_max/d_min) / (6 d_min^(D-1)). Zero iff square."""
    if d_min > d_max:
        raise ValueError(f"d_min={d_min} exceeds d_max={d_max}")
    if not (is_power_of_two(d_min) and is_power_of_two(d_max)):
        raise ValueError("dimension sizes must be powers of two")
    return math.log2(d_max // d_min) / (6 * d_min ** (D - 1))


def predicted_latency_variant_congestion(algorithm: str, D: int, p: int) -> int:
    """Total distance travelled by the latency-optimal variant on a square
    torus of p = a^D nodes: D times the per-dimension distance sum
    (delta(s) for swing, 2^s for recursive doubling)."""
    a = _root_of(D, p)
    if algorithm == "swing":
        dist = delta
    elif algorithm == "recdoub":
        dist = lambda s: 1 << s  # noqa: E731
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}: expected swing or recdoub")
    return D * sum(dist(s) for s in range(a.bit_length() - 1))


@dataclass(frozen=True)
class VariantChoice:
    """Per-size winner between the latency- and bandwidth-optimal variants."""

    sizes: tuple[int, ...]
    choices: tuple[str, ...]  # variant value per size
    crossover: int | None  # first size where the bandwidth variant wins


def best_variant(
    topology: Topology,
    cost_params: CostParams,
    sizes: tuple[int, ...],
    algorithm: str = "swing",
) -> VariantChoice:
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if algorithm == "swing":
        lat = build_swing(topology, SwingParams(variant=Variant.LATENCY_OPTIMAL), 0)
        bw = build_swing(topology, SwingParams(variant=Variant.BANDWIDTH_OPTIMAL), 0)
    elif algorithm == "recdoub":
        lat = build_recdoub_latency(topology, 0)
        bw = build_recdoub_bandwidth(topology, 0)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}: expected swing or recdoub")
    choices = []
    crossover = None
    for size in sorted(sizes):
        t_lat = simulate(lat, topology, cost_params, size).total_time
        t_bw = simulate(bw, topology, cost_params, size).total_time
        winner = bw if t_bw <= t_lat else lat
        choices.append(winner.variant)
        if winner is bw and crossover is None:
            crossover = size
    return VariantChoice(sizes=tuple(sorted(sizes)), choices=tuple(choices), crossover=crossover)
