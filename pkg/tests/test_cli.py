import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sortembed.cli import bench_ladder, main, run_lemma_suite
from sortembed.embedding import embed_diag


def write(path, obj):
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def trivial_cfg(tmp_path):
    write(tmp_path / "in.txt", "1,2,3\n-1,0.5,4\n# comment\n0,0,0\n")
    return write(tmp_path / "t.json", {
        "group": {"name": "trivial", "d": 3},
        "templates": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        "input": "in.txt",
    })


def test_embed_isometry(trivial_cfg, capsys):
    code, out, _ = run(["embed", "--config", trivial_cfg], capsys)
    assert code == 0
    rows = [[float(t) for t in ln.split(",")] for ln in out.splitlines()]
    assert rows == [[1, 2, 3], [-1, 0.5, 4], [0, 0, 0]]


def test_embed_abs_value(tmp_path, capsys):
    cfg = write(tmp_path / "s.json", {"group": {"name": "sign", "d": 1}, "templates": [[1]],
                                      "reduction": {"kind": "max-entries"}})
    inp = write(tmp_path / "v.txt", "-2\n")
    out_file = tmp_path / "o.txt"
    code, _, _ = run(["embed", "--config", cfg, "--input", inp, "--out", str(out_file)], capsys)
    assert code == 0
    assert out_file.read_text() == "2.0\n"


@pytest.mark.parametrize("cfg, field", [
    ({"group": {"nam": "sign"}, "templates": [[1]]}, "name"),
    ({"group": {"name": "sign", "d": 1}}, "templates"),
    ({"group": {"name": "sign", "d": 1}, "templates": [[1]], "reduction": {"kind": "blend"}}, "reduction.kind"),
    ({"templates": [[1]]}, "group"),
])
def test_malformed_config(tmp_path, capsys, cfg, field):
    path = write(tmp_path / "bad.json", dict(cfg, input="v.txt"))
    write(tmp_path / "v.txt", "1\n")
    code, _, err = run(["embed", "--config", path], capsys)
    assert code == 1
    assert field in err


def test_missing_and_invalid_files(tmp_path, capsys):
    assert run(["embed", "--config", str(tmp_path / "nope.json")], capsys)[0] == 1
    bad = write(tmp_path / "bad.json", "{not json")
    assert run(["analyze", "--config", bad], capsys)[0] == 1
    assert run(["frobnicate"], capsys)[0] == 1


def test_analyze_zero_map_exits_2(tmp_path, capsys):
    cfg = write(tmp_path / "z.json", {"group": {"name": "sign", "d": 2}, "templates": [[1, 0]],
                                      "reduction": {"kind": "zero"}, "trials": 500})
    code, out, _ = run(["analyze", "--config", cfg], capsys)
    assert code == 2
    rep = json.loads(out)
    assert rep["separation"]["verdict"] == "collision-found"
    assert rep["c_hat"] == 0.0


def test_analyze_isometry(trivial_cfg, capsys):
    code, out, _ = run(["analyze", "--config", trivial_cfg, "--trials", "2000", "--seed", "3"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["c_hat"] == pytest.approx(1.0, abs=1e-12)
    assert rep["C_hat"] == pytest.approx(1.0, abs=1e-12)
    assert list(rep)[:3] == ["pipeline_digest", "M", "N"]


def test_analyze_mercedes_benz(tmp_path, capsys):
    cfg = write(tmp_path / "mb.json", {"frame": "mercedes-benz", "trials": 2000})
    code, out, _ = run(["analyze", "--config", cfg], capsys)
    assert code == 0
    assert json.loads(out)["analytic_upper"] == pytest.approx(math.sqrt(1.5), abs=1e-12)


def test_analyze_is_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path / "s.json", {"group": {"name": "cyclic", "d": 3},
                                      "templates": [[1, 0.5, -1], [0.2, 1, 0.3]], "trials": 3000})
    a = run(["analyze", "--config", cfg, "--seed", "7"], capsys)[1]
    b = run(["analyze", "--config", cfg, "--seed", "7"], capsys)[1]
    c = run(["analyze", "--config", cfg, "--seed", "8"], capsys)[1]
    assert a == b
    assert a != c


def test_diag_form_config(tmp_path, capsys):
    rng = np.random.default_rng(0)
    A, B, X = rng.standard_normal((2, 3)), rng.standard_normal((3, 3)), rng.standard_normal((3, 2))
    write(tmp_path / "x.txt", ",".join(repr(float(v)) for v in X.reshape(-1)) + "\n")
    cfg = write(tmp_path / "d.json", {"pipeline": "diag-form", "A": A.tolist(), "B": B.tolist(), "input": "x.txt"})
    code, out, _ = run(["embed", "--config", cfg], capsys)
    assert code == 0
    assert np.allclose([float(t) for t in out.split(",")], embed_diag(A, B, X))


def test_lemmas_pass(capsys):
    code, out, _ = run(["lemmas", "--M", "4", "--p-max", "3", "--scenarios", "500", "--seed", "1"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["checked"] == 3000 and rep["counterexamples"] == 0


def test_lemmas_cap(capsys):
    assert run(["lemmas", "--M", "8"], capsys)[0] == 1


def test_lemmas_from_config(tmp_path, capsys):
    cfg = write(tmp_path / "l.json", {"M": 3, "p_max": 1, "scenarios": 5, "seed": 2})
    code, out, _ = run(["lemmas", "--config", cfg], capsys)
    assert code == 0 and json.loads(out)["checked"] == 10
    bad = write(tmp_path / "b.json", {"M": "four"})
    assert run(["lemmas", "--config", bad], capsys)[0] == 1


def test_lemmas_injected_counterexample(tmp_path, capsys):
    cert = tmp_path / "cert.json"
    code, out, _ = run(["lemmas", "--M", "3", "--scenarios", "2", "--inject-corrupt",
                        "--certificate", str(cert)], capsys)
    assert code == 3
    assert json.loads(out)["counterexamples"] == 1
    payload = json.loads(cert.read_text())
    assert payload[0]["failed"] and "xs" in payload[0]["scenario"]


def test_run_lemma_suite_deterministic():
    assert run_lemma_suite(4, 2, 20, 5) == run_lemma_suite(4, 2, 20, 5)


def test_bench_diag_reports(capsys):
    code, out, _ = run(["bench-diag", "--m", "8", "--n", "4", "--D", "16", "--reps", "3", "--steps", "3"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["ladder"]["sizes"] == [16, 32, 64]
    assert all(t > 0 for t in rep["ladder"]["median_ns"])


def test_bench_diag_degenerate_m1(capsys):
    assert run(["bench-diag", "--m", "1", "--n", "4", "--D", "8", "--reps", "2", "--steps", "1"], capsys)[0] == 0


def test_bench_diag_rejects_bad_sizes(capsys):
    assert run(["bench-diag", "--m", "0"], capsys)[0] == 1


def test_bench_doubling_n():
    # n large against log m so the product dominates the sort; single doublings
    # jump where BLAS switches kernels, so use the fitted ratio per doubling
    ladder = bench_ladder(32, 128, 64, 40, seed=0, vary="n", steps=4)
    assert 1.6 <= 2 ** ladder["slope"] <= 2.6, ladder


def test_bench_doubling_D():
    ladder = bench_ladder(64, 32, 256, 40, seed=1, vary="D", steps=4)
    assert 1.6 <= 2 ** ladder["slope"] <= 2.6, ladder


def test_sign_command(tmp_path, capsys):
    code, out, _ = run(["sign"], capsys)
    assert code == 0
    assert json.loads(out)["lower_constant"] == pytest.approx(1 / math.sqrt(2))
    frame = write(tmp_path / "f.txt", "2 2\n1 0\n0 1\n")
    rep = json.loads(run(["sign", "--frame", frame], capsys)[1])
    assert rep["lower_constant"] == 0.0 and rep["witness"] is not None


def test_console_entry_point(trivial_cfg):
    res = subprocess.run([sys.executable, "-m", "sortembed.cli", "embed", "--config", trivial_cfg],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "1.0,2.0,3.0"


CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("command, name, expected", [
    ("embed", "isometry", 0),
    ("embed", "s3-generators", 0),
    ("embed", "diag-form", 0),
    ("analyze", "degenerate-sign", 2),
    ("analyze", "mercedes-benz", 0),
    ("sign", "frame", 0),
    ("lemmas", "lemmas", 0),
])
def test_shipped_configs(tmp_path, command, name, expected):
    extra = ["--trials", "2000"] if command == "analyze" else []
    code = main([command, "--config", str(CONFIGS / f"{name}.json"), "--out", str(tmp_path / "out"), *extra])
    assert code == expected
