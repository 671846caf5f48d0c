import subprocess
import sys

import pytest

from artifact.cli import main
from artifact.poly import parse_poly


def run(argv, cache_dir=None):
    lines = []
    if cache_dir is not None:
        argv = argv + ["--cache-dir", str(cache_dir)]
    code = main(argv, lines.append)
    return code, lines


def test_graphs_lists_two_for_n1():
    code, lines = run(["graphs", "--n", "1", "--m", "2"])
    assert code == 0
    assert len([ln for ln in lines if not ln.startswith("#")]) == 2


def test_graphs_tsv_schema():
    code, lines = run(["graphs", "--n", "2", "--mode", "essential", "--format", "tsv"])
    assert code == 0
    assert lines[0] == "#tsv-v1\tid\tclass\tmultiplicity"
    # the header is the version tag followed by the column names
    assert all(len(ln.split("\t")) == 3 for ln in lines[1:])


def test_bch_order3(cache_dir):
    code, lines = run(["bch", "--order", "3", "--cache-only"], cache_dir)
    assert code == 0
    assert lines[0].startswith("# convention_version=")
    assert any("1/12 * [X,[X,Y]]" in ln for ln in lines)
    assert not any("MISMATCH" in ln for ln in lines)


def test_star_abelian_is_pointwise(tmp_path, cache_dir):
    f = tmp_path / "f.poly"
    g = tmp_path / "g.poly"
    f.write_text("e1^2 + e2\n")
    g.write_text("e3 e1 - 2\n")
    code, lines = run(["star", "--algebra", "abelian3", str(f), str(g), "--order", "3", "--cache-only"], cache_dir)
    assert code == 0
    body = [ln for ln in lines if not ln.startswith("#")]
    names = ["e1", "e2", "e3"]
    assert len(body) == 1 and body[0].startswith("eps^0 : ")
    assert parse_poly(body[0][8:], names) == parse_poly("e1^2 + e2", names) * parse_poly("e3 e1 - 2", names)


def test_star_heisenberg(cache_dir):
    code, lines = run(["star", "--algebra", "heisenberg3", "X", "Y", "--cache-only"], cache_dir)
    assert code == 0
    assert lines[-2:] == ["eps^0 : 1 * X Y", "eps^1 : 1/2 * Z"]


@pytest.mark.parametrize("argv", [
    ["star", "--algebra", "sl2", "X", "Q"],
    ["star", "--algebra", "dim=2; basis=a,b; bracket a c = 1*b", "a", "b"],
    ["graphs", "--n", "9"],
    ["weights", "n=1;m=2;e=1>1"],
    ["weights"],
    ["bch", "--order", "3", "--samples", "1000"],
    ["reduce", "--sub", "no-such-preset"],
    ["frobnicate"],
])
def test_validation_errors_exit_1(argv, cache_dir, capsys):
    code, _ = run(argv, cache_dir)
    assert code == 1


def test_cache_only_miss_is_an_error(tmp_path):
    code, _ = run(["weights", "n=1;m=3;e=1>G1,1>G3", "--cache-only"], tmp_path)
    assert code == 1


def test_ambiguous_numerics_exit_2(tmp_path):
    # a weight absent from the bundled cache, integrated with few points; with
    # a huge denominator bound many rationals fit the 3 sigma window
    argv = ["weights", "n=3;m=1;e=1>G1:+,1>2:+,2>3:-,2>G1:+,3>I:+,3>G1:+", "--weight-mode", "two-color",
            "--samples", "32", "--den-bound", "5000", "--format", "tsv"]
    code, lines = run(argv, tmp_path)
    assert code == 2
    assert lines[2].endswith("\t\tambiguous")
    assert lines[-1].startswith("# unsnapped")


def test_raw_weights_report_values(cache_dir):
    code, lines = run(["weights", "--n", "2", "--raw", "--cache-only", "--format", "tsv"], cache_dir)
    assert code == 0
    rows = [ln.split("\t") for ln in lines if not ln.startswith("#")]
    assert rows and all(r[-1] in ("raw", "ok") for r in rows)


def test_reduce_and_checks(cache_dir):
    code, lines = run(["reduce", "--sub", "iwasawa", "--cache-only"], cache_dir)
    assert code == 0
    assert any(ln.startswith("# basis (3 elements") for ln in lines)
    code, lines = run(["duflo-check", "--algebra", "sl2", "--max-power", "1"])
    assert code == 0 and lines[-1] == "C^1, C^1: residual 0"
    code, lines = run(["edouble", "--algebra", "abelian2", "--cache-only"], cache_dir)
    assert code == 0 and "within 3 sigma" in lines[-1]


def test_machine_output_is_reproducible(cache_dir):
    argv = ["bch", "--order", "4", "--raw", "--cache-only", "--format", "tsv"]
    assert run(argv, cache_dir) == run(argv, cache_dir)


def test_module_entry_point(tmp_path):
    args = [sys.executable, "-m", "artifact", "graphs", "--n", "1", "--format", "tsv"]
    a = subprocess.run(args, capture_output=True, check=True)
    b = subprocess.run(args, capture_output=True, check=True)
    assert a.stdout == b.stdout
    assert a.stdout.decode().count("\n") == 3
