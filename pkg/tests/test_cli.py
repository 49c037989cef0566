"""End-to-end CLI behavior through main(argv)."""

from __future__ import annotations

import csv
import io
import json

import pytest

from woldlab.cli import main
from woldlab.operator import SparseVector
from woldlab.tree_core import TkInfKernel


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    lines = text.splitlines()
    trailers = [l for l in lines if l.startswith("# ")]
    rows = list(csv.reader(io.StringIO("\n".join(
        l for l in lines if not l.startswith("# ")))))
    return rows[0], rows[1:], trailers


# ---------------------------------------------------------------------------
# alpha


def test_alpha_json_zpath(capsys):
    code, out, _ = run(capsys, "alpha", "--tree", "zpath", "--weights",
                       "constant:1", "--vertex", "0", "--N", "5")
    assert code == 0
    obj = json.loads(out)
    assert obj["verdict"]["verdict"] == "converged"
    assert obj["verdict"]["value"] == 1.0
    assert len(obj["table"]) == 6
    assert obj["table"][0] == [0, 1.0, 1.0]


def test_alpha_csv_with_verdict_trailer(capsys):
    code, out, _ = run(capsys, "alpha", "--vertex", "0,0", "--N", "10",
                       "--format", "csv")
    assert code == 0
    header, rows, trailers = parse_csv(out)
    assert header == ["n", "t_n", "partial_sum"]
    assert len(rows) == 11
    assert float(rows[3][1]) == pytest.approx(7.0)   # t_3 = 3^2 - 3 + 1
    assert len(trailers) == 1
    verdict = json.loads(trailers[0].removeprefix("# verdict: "))
    assert verdict["verdict"] == "diverged" and verdict["method"] == "analytic"


def test_alpha_dual_flag(capsys):
    code, out, _ = run(capsys, "alpha", "--dual", "--vertex", "0,0", "--N", "50")
    assert code == 0
    obj = json.loads(out)
    assert obj["verdict"]["verdict"] == "converged"
    assert obj["verdict"]["value"] == pytest.approx(5.192589122417427, abs=1e-6)


def test_alpha_no_plugins_degrades_to_heuristic(capsys):
    code, out, _ = run(capsys, "alpha", "--vertex", "0,0", "--no-plugins")
    assert code == 0
    obj = json.loads(out)
    assert obj["verdict"]["method"] == "heuristic"
    assert obj["verdict"]["evidence"]["rule"] == "threshold"


def test_alpha_prop51_rules_match_ex52(capsys):
    code, out, _ = run(capsys, "alpha", "--weights", "prop51", "--a", "const:1",
                       "--b", "const:1", "--vertex", "0,0", "--N", "8")
    assert code == 0
    obj = json.loads(out)
    assert obj["table"][5][1] == pytest.approx(21.0)  # t_5 = 5^2 - 5 + 1


# ---------------------------------------------------------------------------
# tree show


TREE_FILE = "#boundary: r x q c y\nr: a b\na: x q\nb: c y\n"


def test_tree_show_from_file(tmp_path, capsys):
    f = tmp_path / "patch.tree"
    f.write_text(TREE_FILE)
    code, out, _ = run(capsys, "tree", "show", "--tree", str(f), "--vertex", "a",
                       "--window", "1,1", "--format", "csv")
    assert code == 0
    header, rows, _ = parse_csv(out)
    assert header == ["depth", "vertex", "children"]
    assert ["0", "r", "2"] in rows
    assert ["1", "a", "2"] in rows and ["1", "b", "2"] in rows


def test_tree_show_json_builtin(capsys):
    code, out, _ = run(capsys, "tree", "show", "--tree", "tkinf:2",
                       "--vertex", "0,0", "--window", "1,1")
    assert code == 0
    obj = json.loads(out)
    assert obj["tree"] == "tkinf"
    assert obj["levels"][0]["vertices"] == ["-1,0"]
    assert sorted(obj["levels"][2]["vertices"]) == ["1,1", "1,2"]


def test_malformed_tree_file_fails_cleanly(tmp_path, capsys):
    f = tmp_path / "bad.tree"
    f.write_text("a: a\n")
    code, _, err = run(capsys, "tree", "show", "--tree", str(f))
    assert code == 2
    assert err.startswith("error:")


# ---------------------------------------------------------------------------
# dual table, defect, balanced


def test_dual_table_boundary_values(capsys):
    code, out, _ = run(capsys, "dual", "--vertex", "0,0", "--window", "1,1",
                       "--format", "csv")
    assert code == 0
    _, rows, _ = parse_csv(out)
    by_vertex = {r[0]: (float(r[1]), float(r[2])) for r in rows}
    assert by_vertex["0,0"] == (1.0, 0.5)
    lam, lam_dual = by_vertex["2,1"]
    assert lam == pytest.approx(3.0 ** 0.5)
    assert lam_dual == pytest.approx(1.0 / 3.0 ** 0.5)


def test_defect_csv_classification(capsys):
    code, out, _ = run(capsys, "defect", "--m", "3", "--vertex", "0,0",
                       "--format", "csv")
    assert code == 0
    header, rows, trailers = parse_csv(out)
    assert header == ["vertex", "d_3"]
    assert trailers == ["# classification: 3-expansion"]
    by_vertex = {r[0]: float(r[1]) for r in rows}
    assert by_vertex["2,1"] == pytest.approx(0.0, abs=1e-9)


def test_balanced_json(capsys):
    code, out, _ = run(capsys, "balanced", "--vertex", "0,0")
    assert code == 0
    obj = json.loads(out)
    assert obj["balanced"]["verdict"] == "not_balanced"
    assert obj["balanced"]["witness"] is not None
    assert obj["norm_increasing"]["verdict"] == "norm_increasing"
    assert obj["norm_increasing"]["min_norm_sq"] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# wold and gvec


def test_wold_verdict_and_summary(capsys):
    code, out, err = run(capsys, "wold", "--vertex", "0,0")
    assert code == 0
    obj = json.loads(out)
    assert obj["verdict"] == "NoWold" and obj["case"] == "none"
    assert err.strip() == "NoWold (method=analytic)"


def test_wold_output_is_deterministic(capsys):
    _, first, _ = run(capsys, "wold", "--vertex", "0,0")
    _, second, _ = run(capsys, "wold", "--vertex", "0,0")
    assert first == second


def test_gvec_isometric_tree(capsys):
    code, out, _ = run(capsys, "gvec", "--tree", "tkinf:2", "--weights",
                       "tkinf-isometric", "--vertex", "0,0", "--m", "1",
                       "--N", "6")
    assert code == 0
    obj = json.loads(out)
    assert obj["alpha"] == pytest.approx(2.0)
    vec = SparseVector.from_json(TkInfKernel(2), obj["vector"])
    assert vec.entries == pytest.approx({(1, 1): 1.0, (1, 2): 1.0})
    assert obj["tail_mass"] <= 1e-12


def test_gvec_zero_on_divergence(capsys):
    code, out, _ = run(capsys, "gvec", "--vertex", "0,0", "--m", "0")
    assert code == 0
    obj = json.loads(out)
    assert obj["vector"]["entries"] == []
    assert obj["alpha"] is None


def test_out_writes_file(tmp_path, capsys):
    target = tmp_path / "verdict.json"
    code, out, _ = run(capsys, "wold", "--vertex", "0,0", "--out", str(target))
    assert code == 0 and out == ""
    obj = json.loads(target.read_text())
    assert obj["verdict"] == "NoWold"


# ---------------------------------------------------------------------------
# repro


def test_repro_passes(capsys):
    code, out, _ = run(capsys, "repro", "ex52")
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith("[")]
    assert len(lines) == 8
    assert all(l.startswith("[PASS]") for l in lines)


def test_repro_tamper_pinpoints(capsys):
    code, out, _ = run(capsys, "repro", "ex52", "--tamper")
    assert code == 1
    fails = [l for l in out.splitlines() if l.startswith("[FAIL]")]
    assert fails
    assert any("norm-closed-forms" in l for l in fails)


# ---------------------------------------------------------------------------
# argument errors


@pytest.mark.parametrize("argv", [
    ("alpha", "--weights", "mystery"),
    ("alpha", "--vertex", "zzz"),
    ("alpha", "--window", "nope"),
    ("alpha", "--N", "0"),
    ("alpha", "--weights", "csv:/does/not/exist.csv"),
])
def test_bad_inputs_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("error:")
