"""Experiment runner for allreduce schedules.

Subcommands:
  verify         build each schedule and check delivery of every contribution
  sweep          simulate a size sweep and emit one result row per point
  analyze        emit measured deficiencies next to closed-form predictions
  dump-schedule  write a schedule's transfers, one line each

Examples:
  swingsim verify --topology torus:16 --algos swing-bw
  swingsim sweep --topology torus:64x64 --algos swing,recdoub,ring,bucket
  swingsim analyze --topology torus:64x64 --algos swing-bw,bucket --format json
  swingsim dump-schedule --topology torus:8 --algos swing-bw --output sched.csv
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from .analysis import deficiencies, predicted_swing_congestion, xi_q
from .baselines import (
    build_bucket,
    build_recdoub_bandwidth,
    build_recdoub_latency,
    build_recdoub_mirrored,
    build_ring,
)
from .blockflow import is_power_of_two
from .netsim import CostParams, max_link_multiplicity, simulate
from .schedule import Schedule, Step, count_steps, dump_schedule
from .swing import SwingParams, Variant, build_swing
from .topology import (
    DEFAULT_HOP_PROCESSING_NS,
    DEFAULT_LINK_BANDWIDTH_GBPS,
    DEFAULT_LINK_LATENCY_NS,
    Family,
    Topology,
    parse_topology,
)
from .verify import verify_allreduce

# Expanding a sweep point verifies the schedule first; above this many nodes
# the transfer-level replay is too slow for a sweep, so it is skipped with a
# warning. `swingsim verify` never skips.
VERIFY_NODE_LIMIT = 2048

_ALGO_TOKENS: dict[str, tuple[tuple[str, str], ...]] = {
    "swing": (("swing", "latency-optimal"), ("swing", "bandwidth-optimal")),
    "swing-l": (("swing", "latency-optimal"),),
    "swing-bw": (("swing", "bandwidth-optimal"),),
    "recdoub": (("recdoub", "latency-optimal"), ("recdoub", "bandwidth-optimal")),
    "recdoub-l": (("recdoub", "latency-optimal"),),
    "recdoub-bw": (("recdoub", "bandwidth-optimal"),),
    "recdoub-mirrored": (("recdoub", "mirrored"),),
    "ring": (("ring", "-"),),
    "bucket": (("bucket", "-"),),
}

_SIZE_SUFFIXES = (("GiB", 1024**3), ("MiB", 1024**2), ("KiB", 1024), ("B", 1))

SWEEP_COLUMNS = (
    "topology",
    "algorithm",
    "variant",
    "size_bytes",
    "runtime_ns",
    "goodput_gbps",
    "eta_l",
    "eta_b",
    "eta_c",
    "steps",
    "max_link_multiplicity",
    "gain",
)

ANALYZE_COLUMNS = (
    "topology",
    "algorithm",
    "variant",
    "steps",
    "eta_l",
    "eta_b",
    "eta_c",
    "predicted_eta_c",
)


@dataclass(frozen=True)
class ExperimentConfig:
    topology: str
    algos: tuple[tuple[str, str], ...]  # (algorithm, variant) pairs
    sizes: tuple[int, ...]
    bandwidth_gbps: int
    link_latency_ns: int
    hop_latency_ns: int
    fmt: str
    verify: bool
    output: str | None
    inject_drop: int | None = None


@dataclass(frozen=True)
class ResultRow:
    topology: str
    algorithm: str
    variant: str
    size_bytes: int  # effective (rounded up to the schedule granule)
    runtime_ns: int
    goodput_gbps: float
    eta_l: float
    eta_b: float
    eta_c: float
    steps: int
    max_link_multiplicity: float
    gain: float | None = None  # best-baseline / swing runtime, best rows only


def parse_size(token: str) -> int:
    token = token.strip()
    digits, scale = token, 1
    for suffix, suffix_scale in _SIZE_SUFFIXES:
        if token.endswith(suffix):
            digits, scale = token[: -len(suffix)], suffix_scale
            break
    if not digits.isdigit():
        raise ValueError(
            f"bad size {token!r}: expected an integer with optional B/KiB/MiB/GiB suffix"
        )
    return int(digits) * scale


def parse_sizes(text: str) -> tuple[int, ...]:
    """Either a sweep `MIN:MAX:xK` or a comma-separated list of sizes."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3 or not parts[2].lower().startswith("x"):
            raise ValueError(f"size range {text!r} must look like MIN:MAX:xK")
        lo, hi = parse_size(parts[0]), parse_size(parts[1])
        try:
            step = int(parts[2][1:])
        except ValueError:
            raise ValueError(f"bad multiplicative step in {text!r}") from None
        if lo <= 0 or lo > hi or step <= 1:
            raise ValueError(f"size range {text!r} needs 0 < MIN <= MAX and K > 1")
        sizes = []
        size = lo
        while size <= hi:
            sizes.append(size)
            size *= step
        return tuple(sizes)
    sizes = tuple(dict.fromkeys(parse_size(token) for token in text.split(",")))
    if any(size <= 0 for size in sizes):
        raise ValueError("sizes must be positive")
    return sizes


def parse_algos(text: str) -> tuple[tuple[str, str], ...]:
    pairs: list[tuple[str, str]] = []
    for token in text.split(","):
        token = token.strip().lower()
        if token not in _ALGO_TOKENS:
            raise ValueError(
                f"unknown algorithm {token!r}; choose from {', '.join(sorted(_ALGO_TOKENS))}"
            )
        for pair in _ALGO_TOKENS[token]:
            if pair not in pairs:
                pairs.append(pair)
    if not pairs:
        raise ValueError("no algorithms selected")
    return tuple(pairs)


def build_schedule(topology: Topology, algorithm: str, variant: str, n: int = 0) -> Schedule:
    if algorithm == "swing":
        return build_swing(topology, SwingParams(variant=Variant(variant)), n)
    if algorithm == "recdoub":
        builder = {
            "latency-optimal": build_recdoub_latency,
            "bandwidth-optimal": build_recdoub_bandwidth,
            "mirrored": build_recdoub_mirrored,
        }[variant]
        return builder(topology, n)
    if algorithm == "ring":
        return build_ring(topology, n)
    if algorithm == "bucket":
        return build_bucket(topology, n)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _drop_transfer(schedule: Schedule, drop: int) -> Schedule:
    """Remove the drop-th transfer (template order); fault-injection hook."""
    steps = []
    seen = 0
    for step in schedule.steps:
        transfers = list(step.transfers)
        if seen <= drop < seen + len(transfers):
            del transfers[drop - seen]
        seen += len(transfers)
        if transfers:
            steps.append(
                Step(len(steps), step.phase, tuple(transfers), step.repeat, step.rotations)
            )
    return dataclasses.replace(schedule, steps=tuple(steps))


def _topology(config: ExperimentConfig) -> Topology:
    return parse_topology(
        config.topology,
        link_bandwidth_gbps=config.bandwidth_gbps,
        link_latency_ns=config.link_latency_ns,
        hop_processing_ns=config.hop_latency_ns,
    )


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(value: float | None, places: int) -> str:
    return "" if value is None else f"{value:.{places}f}"


def cmd_verify(config: ExperimentConfig) -> int:
    topology = _topology(config)
    lines = []
    failures = 0
    for algorithm, variant in config.algos:
        schedule = build_schedule(topology, algorithm, variant)
        if config.inject_drop is not None:
            schedule = _drop_transfer(schedule, config.inject_drop)
        report = verify_allreduce(schedule, topology.num_nodes)
        if report:
            lines.append(f"ok {config.topology} {algorithm} {variant}\n")
        else:
            failures += 1
            lines.append(f"FAIL {config.topology} {algorithm} {variant}: {report.detail}\n")
    _emit("".join(lines), config.output)
    return 1 if failures else 0


@dataclass(frozen=True)
class _SweepPoint:
    row: ResultRow
    requested: int
    time: Fraction


def _sweep_points(config: ExperimentConfig) -> list[_SweepPoint] | int:
    topology = _topology(config)
    cost = CostParams.from_topology(topology)
    schedules = []
    for algorithm, variant in config.algos:
        schedule = build_schedule(topology, algorithm, variant)
        if config.inject_drop is not None:
            schedule = _drop_transfer(schedule, config.inject_drop)
        schedules.append((algorithm, variant, schedule))
    if config.verify:
        if topology.num_nodes > VERIFY_NODE_LIMIT:
            print(
                f"warning: skipping verification at {topology.num_nodes} nodes "
                f"(> {VERIFY_NODE_LIMIT}); pass --no-verify to silence",
                file=sys.stderr,
            )
        else:
            for algorithm, variant, schedule in schedules:
                report = verify_allreduce(schedule, topology.num_nodes)
                if not report:
                    print(
                        f"verification failed: {config.topology} {algorithm} {variant}: "
                        f"{report.detail}",
                        file=sys.stderr,
                    )
                    return 1
    points = []
    for algorithm, variant, schedule in schedules:
        report = deficiencies(schedule, topology)
        steps = count_steps(schedule)
        multiplicity = max_link_multiplicity(schedule, topology)
        for size in config.sizes:
            sim = simulate(schedule, topology, cost, size)
            points.append(
                _SweepPoint(
                    row=ResultRow(
                        topology=config.topology,
                        algorithm=algorithm,
                        variant=variant,
                        size_bytes=sim.effective_n,
                        runtime_ns=round(sim.total_time),
                        goodput_gbps=sim.goodput,
                        eta_l=report.eta_l,
                        eta_b=report.eta_b,
                        eta_c=report.eta_c,
                        steps=steps,
                        max_link_multiplicity=multiplicity,
                    ),
                    requested=size,
                    time=sim.total_time,
                )
            )
    base = list(points)
    for size in config.sizes:
        at_size = [pt for pt in base if pt.requested == size]
        swing = [pt for pt in at_size if pt.row.algorithm == "swing"]
        if not swing:
            continue
        winner = min(swing, key=lambda pt: (pt.time, pt.row.variant))
        rivals = [
            pt.time
            for pt in at_size
            if pt.row.algorithm != "swing" and pt.row.variant != "mirrored"
        ]
        gain = float(min(rivals) / winner.time) if rivals else None
        points.append(
            _SweepPoint(
                row=dataclasses.replace(winner.row, algorithm="best", gain=gain),
                requested=size,
                time=winner.time,
            )
        )
    points.sort(key=lambda pt: (pt.row.topology, pt.row.algorithm, pt.requested, pt.row.variant))
    return points


def cmd_sweep(config: ExperimentConfig) -> int:
    points = _sweep_points(config)
    if isinstance(points, int):
        return points
    if config.fmt == "csv":
        out = io.StringIO()
        out.write(",".join(SWEEP_COLUMNS) + "\n")
        for pt in points:
            row = pt.row
            out.write(
                ",".join(
                    (
                        row.topology,
                        row.algorithm,
                        row.variant,
                        str(row.size_bytes),
                        str(row.runtime_ns),
                        _fmt(row.goodput_gbps, 3),
                        _fmt(row.eta_l, 4),
                        _fmt(row.eta_b, 4),
                        _fmt(row.eta_c, 4),
                        str(row.steps),
                        _fmt(row.max_link_multiplicity, 3),
                        _fmt(row.gain, 4),
                    )
                )
                + "\n"
            )
        _emit(out.getvalue(), config.output)
    else:
        records = [
            {
                "topology": pt.row.topology,
                "algorithm": pt.row.algorithm,
                "variant": pt.row.variant,
                "size_bytes": pt.row.size_bytes,
                "runtime_ns": pt.row.runtime_ns,
                "goodput_gbps": float(_fmt(pt.row.goodput_gbps, 3)),
                "eta_l": float(_fmt(pt.row.eta_l, 4)),
                "eta_b": float(_fmt(pt.row.eta_b, 4)),
                "eta_c": float(_fmt(pt.row.eta_c, 4)),
                "steps": pt.row.steps,
                "max_link_multiplicity": float(_fmt(pt.row.max_link_multiplicity, 3)),
                "gain": None if pt.row.gain is None else float(_fmt(pt.row.gain, 4)),
            }
            for pt in points
        ]
        _emit(json.dumps(records, indent=2) + "\n", config.output)
    return 0


def _predicted_eta_c(topology: Topology, algorithm: str, variant: str) -> float | None:
    """Closed-form congestion deficiency where one is known."""
    if algorithm in ("ring", "bucket"):
        return 1.0
    if algorithm == "swing" and variant == "bandwidth-optimal":
        if topology.family is Family.HYPERX:
            return 1.0
        dims = topology.dims
        if (
            topology.family is Family.TORUS
            and len(dims) >= 2
            and all(is_power_of_two(d) for d in dims)
        ):
            D = len(dims)
            d_min, d_max = min(dims), max(dims)
            return predicted_swing_congestion(D, d_min**D) + xi_q(d_min, d_max, D)
    return None


def cmd_analyze(config: ExperimentConfig) -> int:
    topology = _topology(config)
    records = []
    for algorithm, variant in sorted(config.algos):
        schedule = build_schedule(topology, algorithm, variant)
        report = deficiencies(schedule, topology)
        records.append(
            (
                algorithm,
                variant,
                count_steps(schedule),
                report,
                _predicted_eta_c(topology, algorithm, variant),
            )
        )
    if config.fmt == "csv":
        out = io.StringIO()
        out.write(",".join(ANALYZE_COLUMNS) + "\n")
        for algorithm, variant, steps, report, predicted in records:
            out.write(
                ",".join(
                    (
                        config.topology,
                        algorithm,
                        variant,
                        str(steps),
                        _fmt(report.eta_l, 4),
                        _fmt(report.eta_b, 4),
                        _fmt(report.eta_c, 4),
                        _fmt(predicted, 4),
                    )
                )
                + "\n"
            )
        _emit(out.getvalue(), config.output)
    else:
        _emit(
            json.dumps(
                [
                    {
                        "topology": config.topology,
                        "algorithm": algorithm,
                        "variant": variant,
                        "steps": steps,
                        "eta_l": float(_fmt(report.eta_l, 4)),
                        "eta_b": float(_fmt(report.eta_b, 4)),
                        "eta_c": float(_fmt(report.eta_c, 4)),
                        "predicted_eta_c": None if predicted is None else float(_fmt(predicted, 4)),
                    }
                    for algorithm, variant, steps, report, predicted in records
                ],
                indent=2,
            )
            + "\n",
            config.output,
        )
    return 0


def cmd_dump_schedule(config: ExperimentConfig) -> int:
    if len(config.algos) != 1:
        raise ValueError("dump-schedule needs exactly one algorithm variant")
    topology = _topology(config)
    algorithm, variant = config.algos[0]
    schedule = build_schedule(topology, algorithm, variant)
    out = io.StringIO()
    dump_schedule(schedule, out)
    _emit(out.getvalue(), config.output)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swingsim",
        description="Generate, verify, and cost-simulate allreduce schedules.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "verify": cmd_verify,
        "sweep": cmd_sweep,
        "analyze": cmd_analyze,
        "dump-schedule": cmd_dump_schedule,
    }
    for name, func in commands.items():
        sp = sub.add_parser(name)
        sp.set_defaults(func=func)
        sp.add_argument(
            "--topology",
            required=True,
            help="family:AxB, e.g. torus:64x64, torus:16, hx2mesh:32x32, hyperx:64x64",
        )
        sp.add_argument(
            "--algos",
            default="swing,recdoub,ring,bucket",
            help="comma list: swing, swing-l, swing-bw, recdoub, recdoub-l, "
            "recdoub-bw, recdoub-mirrored, ring, bucket",
        )
        sp.add_argument("--sizes", default="32B:512MiB:x4", help="MIN:MAX:xK or comma list")
        sp.add_argument("--bandwidth", type=int, default=DEFAULT_LINK_BANDWIDTH_GBPS, help="Gb/s per link")
        sp.add_argument("--link-latency", type=int, default=DEFAULT_LINK_LATENCY_NS, help="ns per cable hop")
        sp.add_argument("--hop-latency", type=int, default=DEFAULT_HOP_PROCESSING_NS, help="ns processing per step")
        sp.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
        sp.add_argument("--no-verify", action="store_true", help="skip schedule verification in sweeps")
        sp.add_argument("--output", help="write to this path instead of stdout")
        sp.add_argument("--inject-drop", type=int, default=None, help=argparse.SUPPRESS)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = ExperimentConfig(
            topology=args.topology,
            algos=parse_algos(args.algos),
            sizes=parse_sizes(args.sizes),
            bandwidth_gbps=args.bandwidth,
            link_latency_ns=args.link_latency,
            hop_latency_ns=args.hop_latency,
            fmt=args.fmt,
            verify=not args.no_verify,
            output=args.output,
            inject_drop=args.inject_drop,
        )
        return args.func(config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
