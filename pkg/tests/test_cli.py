"""Command-line interface: argument grammar, outputs, exit codes."""

import csv
import io
import json

import pytest

from swingsim.cli import (
    ANALYZE_COLUMNS,
    SWEEP_COLUMNS,
    main,
    parse_algos,
    parse_size,
    parse_sizes,
)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSizeGrammar:
    @pytest.mark.parametrize(
        "token,expected",
        [
            ("32", 32),
            ("17B", 17),
            ("4KiB", 4096),
            ("2MiB", 2 * 1024**2),
            ("1GiB", 1024**3),
            (" 64B ", 64),
        ],
    )
    def test_sizes_with_binary_suffixes(self, token, expected):
        assert parse_size(token) == expected

    def test_rejects_junk(self):
        for bad in ("", "KiB", "4.5KiB", "-3", "0x20"):
            with pytest.raises(ValueError, match="bad size"):
                parse_size(bad)

    def test_geometric_ranges(self):
        assert parse_sizes("32B:512B:x4") == (32, 128, 512)
        assert len(parse_sizes("32B:512MiB:x4")) == 13

    def test_comma_lists_dedupe_and_keep_order(self):
        assert parse_sizes("64B,32B,64B,1KiB") == (64, 32, 1024)

    @pytest.mark.parametrize(
        "text", ["32B:1KiB", "1KiB:32B:x4", "32B:1KiB:x1", "32B:1KiB:4"]
    )
    def test_rejects_malformed_ranges(self, text):
        with pytest.raises(ValueError):
            parse_sizes(text)


class TestAlgoGrammar:
    def test_family_tokens_expand_to_both_variants(self):
        assert parse_algos("swing") == (
            ("swing", "latency-optimal"),
            ("swing", "bandwidth-optimal"),
        )
        assert parse_algos("recdoub") == (
            ("recdoub", "latency-optimal"),
            ("recdoub", "bandwidth-optimal"),
        )

    def test_explicit_tokens(self):
        assert parse_algos("swing-bw,ring,recdoub-mirrored") == (
            ("swing", "bandwidth-optimal"),
            ("ring", "-"),
            ("recdoub", "mirrored"),
        )

    def test_duplicates_collapse(self):
        assert parse_algos("swing,swing-bw") == (
            ("swing", "latency-optimal"),
            ("swing", "bandwidth-optimal"),
        )

    def test_unknown_token(self):
        with pytest.raises(ValueError, match="unknown algorithm"):
            parse_algos("allreduce9000")


def test_verify_reports_ok_per_variant(capsys):
    code, out, err = run(
        capsys, "verify", "--topology", "torus:4x4", "--algos", "swing,bucket"
    )
    assert code == 0
    assert out.splitlines() == [
        "ok torus:4x4 swing latency-optimal",
        "ok torus:4x4 swing bandwidth-optimal",
        "ok torus:4x4 bucket -",
    ]


def test_verify_exit_one_on_injected_fault(capsys):
    code, out, err = run(
        capsys,
        "verify",
        "--topology", "torus:4x4",
        "--algos", "swing-bw",
        "--inject-drop", "0",
    )
    assert code == 1
    assert out.startswith("FAIL torus:4x4 swing bandwidth-optimal")


def test_sweep_catches_injected_fault(capsys):
    code, out, err = run(
        capsys,
        "sweep",
        "--topology", "torus:4x4",
        "--algos", "ring",
        "--sizes", "64B",
        "--inject-drop", "0",
    )
    assert code == 1
    assert "verification failed" in err
    # --no-verify bypasses the check, so the sweep runs
    code, out, err = run(
        capsys,
        "sweep",
        "--topology", "torus:4x4",
        "--algos", "ring",
        "--sizes", "64B",
        "--inject-drop", "0",
        "--no-verify",
    )
    assert code == 0


def test_bad_requests_exit_two(capsys):
    code, out, err = run(
        capsys, "sweep", "--topology", "torus:4x4x4", "--algos", "ring", "--sizes", "64B"
    )
    assert code == 2
    assert err.startswith("error:")


def test_sweep_csv_shape(capsys):
    code, out, err = run(
        capsys,
        "sweep",
        "--topology", "torus:4x4",
        "--algos", "swing,ring",
        "--sizes", "64B,256B",
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    header = out.splitlines()[0].split(",")
    assert tuple(header) == SWEEP_COLUMNS
    # 3 algorithm variants x 2 sizes, plus one best row per size
    assert len(rows) == 8
    best = [r for r in rows if r["algorithm"] == "best"]
    assert len(best) == 2
    assert all(float(r["gain"]) > 0 for r in best)
    others = [r for r in rows if r["algorithm"] != "best"]
    assert all(r["gain"] == "" for r in others)


def test_sweep_rows_sort_by_algorithm_then_size(capsys):
    code, out, err = run(
        capsys,
        "sweep",
        "--topology", "torus:4x4",
        "--algos", "swing-bw",
        "--sizes", "256B,64B",
    )
    rows = list(csv.DictReader(io.StringIO(out)))
    sizes = [(r["algorithm"], int(r["size_bytes"])) for r in rows]
    assert sizes == [("best", 64), ("best", 256), ("swing", 64), ("swing", 256)]


def test_sweep_output_is_deterministic(capsys):
    argv = (
        "sweep",
        "--topology", "torus:2x4",
        "--algos", "swing,ring,bucket",
        "--sizes", "64B:1KiB:x4",
    )
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_sweep_json_matches_csv_columns(capsys):
    code, out, err = run(
        capsys,
        "sweep",
        "--topology", "torus:4x4",
        "--algos", "ring",
        "--sizes", "64B",
        "--format", "json",
    )
    assert code == 0
    rows = json.loads(out)
    assert [r["algorithm"] for r in rows] == ["ring"]
    assert set(rows[0]) == set(SWEEP_COLUMNS)
    assert rows[0]["gain"] is None
    assert rows[0]["eta_b"] == 1.0


def test_sweep_honors_bandwidth_flag(capsys):
    slow = run(
        capsys, "sweep", "--topology", "torus:4x4", "--algos", "ring",
        "--sizes", "1MiB", "--bandwidth", "100",
    )[1]
    fast = run(
        capsys, "sweep", "--topology", "torus:4x4", "--algos", "ring",
        "--sizes", "1MiB", "--bandwidth", "400",
    )[1]
    t_slow = int(list(csv.DictReader(io.StringIO(slow)))[0]["runtime_ns"])
    t_fast = int(list(csv.DictReader(io.StringIO(fast)))[0]["runtime_ns"])
    assert t_slow > t_fast


def test_analyze_table(capsys):
    code, out, err = run(
        capsys, "analyze", "--topology", "torus:4x4", "--algos", "swing,ring"
    )
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert tuple(header) == ANALYZE_COLUMNS
    rows = {(r["algorithm"], r["variant"]): r for r in csv.DictReader(io.StringIO(out))}
    assert rows[("ring", "-")]["predicted_eta_c"] == "1.0000"
    assert rows[("swing", "bandwidth-optimal")]["predicted_eta_c"] == "0.9375"
    # no closed form for the latency variant
    assert rows[("swing", "latency-optimal")]["predicted_eta_c"] == ""


def test_analyze_rectangular_prediction_adds_the_penalty(capsys):
    code, out, err = run(
        capsys,
        "analyze",
        "--topology", "torus:8x16",
        "--algos", "swing-bw",
        "--no-verify",
    )
    rows = list(csv.DictReader(io.StringIO(out)))
    # square part at 8x8 plus the elongation penalty for 8x16
    assert rows[0]["predicted_eta_c"] == "1.0990"


def test_dump_schedule_lists_transfers(capsys):
    code, out, err = run(
        capsys, "dump-schedule", "--topology", "torus:4", "--algos", "swing-bw"
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "step,phase,collective_id,src,dst,port,payload"
    assert lines[1] == "0,reduce-scatter,0,0,1,0,0x6"


def test_dump_schedule_wants_exactly_one_variant(capsys):
    code, out, err = run(
        capsys, "dump-schedule", "--topology", "torus:4", "--algos", "swing"
    )
    assert code == 2
    assert "exactly one" in err


def test_output_flag_writes_a_file(capsys, tmp_path):
    target = tmp_path / "rows.csv"
    code, out, err = run(
        capsys,
        "sweep",
        "--topology", "torus:4x4",
        "--algos", "ring",
        "--sizes", "64B",
        "--output", str(target),
    )
    assert code == 0
    assert out == ""
    assert target.read_text().startswith("topology,algorithm")
