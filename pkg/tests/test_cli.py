import csv
import json
import math
import re
import subprocess
import sys

import pytest

from bubblelab.cli import read_spec_file, run

ERROR_LINE = re.compile(r"^error: code=[a-z-]+ reason=\S.*$")


def _run(argv, capsys):
    code = run([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def _single_error_line(err):
    lines = [ln for ln in err.splitlines() if ln.strip()]
    assert len(lines) == 1
    assert ERROR_LINE.match(lines[0])
    return lines[0]


class TestFamily:
    def test_single_member(self, tmp_path, capsys):
        code, _, _ = _run(["family", "--profile", "ex1", "--c", "0.1", "--s1", "0.3",
                           "--out", tmp_path], capsys)
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "family.csv")))
        assert len(rows) == 1
        assert float(rows[0]["H"]) == pytest.approx(1 / math.sin(0.3), rel=1e-12)
        assert (tmp_path / "profile.csv").exists()
        assert (tmp_path / "profile.svg").exists()

    def test_s1_beyond_s0(self, tmp_path, capsys):
        code, _, err = _run(["family", "--profile", "ex1", "--s1", "2.0", "--out", tmp_path],
                            capsys)
        assert code == 2
        line = _single_error_line(err)
        assert "s0" in line

    def test_range(self, tmp_path, capsys):
        code, _, _ = _run(["family", "--s1-range", "0.1", "1.2", "5", "--nodes", "200",
                           "--out", tmp_path], capsys)
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "family.csv")))
        assert len(rows) == 5
        V = [float(r["V"]) for r in rows]
        assert V == sorted(V)
        assert (tmp_path / "sweep.svg").exists()

    def test_volume_target(self, tmp_path, capsys):
        code, _, _ = _run(["family", "--v", "5.0", "--no-plots", "--out", tmp_path], capsys)
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "family.csv")))
        assert float(rows[0]["V"]) == pytest.approx(5.0, rel=1e-6)
        assert not (tmp_path / "profile.svg").exists()


class TestStability:
    def test_stable(self, tmp_path, capsys):
        code, out, _ = _run(["stability", "--profile", "ex1", "--c", "0.1", "--s1", "0.4",
                             "--no-plots", "--out", tmp_path], capsys)
        assert code == 0
        rep = json.loads((tmp_path / "stability.json").read_text())
        assert rep["verdict"] == "stable"
        assert "verdict=stable" in out


class TestErrors:
    @pytest.mark.parametrize("argv,code", [
        (["family"], 2),
        (["nonsense"], 2),
        (["family", "--s1", "-1"], 2),
        (["family", "--s1", "0.3", "--v", "2"], 2),
        (["family", "--profile", "nope", "--s1", "0.3"], 2),
        (["embed", "--c", "1", "--interval", "-1.4", "1.4"], 2),
        (["stability", "--s1", "0.3", "--k-max", "0"], 2),
        (["flow", "--resolution", "4"], 2),
    ])
    def test_exit_codes(self, argv, code, tmp_path, capsys):
        got, _, err = _run(argv + ["--out", tmp_path] if argv[0] in
                           ("family", "embed", "stability", "flow") else argv, capsys)
        assert got == code
        _single_error_line(err)

    def test_numerical_failure_exit_1(self, tmp_path, capsys):
        # a huge explicit step drives sigma negative on the first step
        code, _, err = _run(["flow", "--a", "2", "--n", "1", "--step", "1e6", "--resolution", "16",
                             "--out", tmp_path], capsys)
        assert code == 1
        assert "code=numerical-failure" in _single_error_line(err)

    def test_embed_names_s(self, tmp_path, capsys):
        code, _, err = _run(["embed", "--c", "1", "--interval", "-1.4", "1.4", "--out", tmp_path],
                            capsys)
        assert code == 2
        assert re.search(r"at s = -?1\.19753", err)

    def test_io_error(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _, err = _run(["family", "--s1", "0.3", "--out", blocker / "sub"], capsys)
        assert code == 1
        assert "code=io-error" in _single_error_line(err)

    def test_help_exit_zero(self, capsys):
        assert run(["--help"]) == 0


class TestDeterminism:
    def _files(self, d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    @pytest.mark.parametrize("argv", [
        ["family", "--s1", "0.5", "--nodes", "200"],
        ["flow", "--k", "2", "--resolution", "16", "--a", "20", "--seed", "7",
         "--check-fields", "5", "--max-steps", "200"],
        ["bounds", "--s1", "0.5", "--nodes", "200"],
        ["embed", "--c", "0.2", "--samples", "101", "--n-theta", "12", "--s1", "0.4",
         "--nodes", "200"],
    ])
    def test_byte_identical(self, argv, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert _run(argv + ["--out", a], capsys)[0] == 0
        assert _run(argv + ["--out", b], capsys)[0] == 0
        fa, fb = self._files(a), self._files(b)
        assert fa.keys() == fb.keys() and fa == fb

    def test_seed_changes_output(self, tmp_path, capsys):
        base = ["flow", "--resolution", "16", "--a", "20", "--max-steps", "50", "--no-plots"]
        _run(base + ["--seed", "1", "--out", tmp_path / "a"], capsys)
        _run(base + ["--seed", "2", "--out", tmp_path / "b"], capsys)
        assert ((tmp_path / "a" / "trajectory.csv").read_bytes()
                != (tmp_path / "b" / "trajectory.csv").read_bytes())

    def test_svg_viewbox(self, tmp_path, capsys):
        _run(["family", "--s1", "0.5", "--nodes", "200", "--out", tmp_path], capsys)
        head = (tmp_path / "profile.svg").read_text()[:2000]
        assert 'viewBox="0 0 800 600"' in head


class TestOutputs:
    def test_flow(self, tmp_path, capsys):
        code, out, _ = _run(["flow", "--check-fields", "10", "--seed", "3", "--out", tmp_path],
                            capsys)
        assert code == 0
        summ = json.loads((tmp_path / "flow_summary.json").read_text())
        assert summ["converged"] and summ["volume_drift"] <= 1e-10
        assert summ["inequality_violations"] == 0
        header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
        assert header == "step,area,volume,tau_inf_over_a"
        assert "converged=true" in out

    def test_flow_init_csv(self, tmp_path, capsys):
        init = tmp_path / "init.csv"
        init.write_text(",".join(str(10 + 0.5 * math.sin(2 * math.pi * i / 32))
                                 for i in range(32)) + "\n")
        code, _, _ = _run(["flow", "--init", init, "--no-plots", "--out", tmp_path / "o"], capsys)
        assert code == 0

    def test_bounds_cylinder(self, tmp_path, capsys):
        code, out, _ = _run(["bounds", "--cylinder-r", "0.7", "--n", "2", "--out", tmp_path],
                            capsys)
        assert code == 0
        rows = {r["inequality"]: r for r in csv.DictReader(open(tmp_path / "bounds.csv"))}
        assert rows["area-le-nHv/(n-1)"]["pass"] == "true"
        assert abs(float(rows["area-le-nHv/(n-1)"]["margin"])) < 1e-12
        assert rows["area-le-vH+2X0"]["applicable"] == "false"
        assert "hold" in out

    def test_bounds_member(self, tmp_path, capsys):
        code, _, _ = _run(["bounds", "--s1", str(math.pi / 6), "--c", "1", "--out", tmp_path],
                          capsys)
        assert code == 0
        rows = {r["inequality"]: r for r in csv.DictReader(open(tmp_path / "bounds.csv"))}
        assert rows["area-le-vH+2X0"]["pass"] == "true"
        consts = json.loads((tmp_path / "constants.json").read_text())
        assert consts["H"] == pytest.approx(2.0, rel=1e-12)

    def test_embed(self, tmp_path, capsys):
        code, _, _ = _run(["embed", "--c", "0.1", "--samples", "201", "--n-theta", "16",
                           "--s1", "0.4", "--out", tmp_path], capsys)
        assert code == 0
        for name in ("curve.csv", "Y.obj", "bubble.obj", "meridian.svg", "profile.svg"):
            assert (tmp_path / name).exists()
        assert (tmp_path / "curve.csv").read_text().splitlines()[0] == "s,r,x3"


class TestSpecFile:
    def test_tokens(self, tmp_path):
        spec = tmp_path / "run.spec"
        spec.write_text("# comment\nprofile = ex2\ns1=0.3\nno_plots=true\nliteral_beta=false\n"
                        "s1_range = 0.1 0.2 3\n")
        assert read_spec_file(spec) == ["--profile", "ex2", "--s1", "0.3", "--no-plots",
                                        "--s1-range", "0.1", "0.2", "3"]

    def test_spec_and_override(self, tmp_path, capsys):
        spec = tmp_path / "run.spec"
        spec.write_text("profile=ex1\nc=0.1\ns1=0.3\nno_plots=true\n")
        code, _, _ = _run(["family", "--spec", spec, "--out", tmp_path / "a"], capsys)
        assert code == 0
        h = float(next(csv.DictReader(open(tmp_path / "a" / "family.csv")))["H"])
        assert h == pytest.approx(1 / math.sin(0.3), rel=1e-12)
        code, _, _ = _run(["family", "--spec", spec, "--s1", "0.5", "--out", tmp_path / "b"],
                          capsys)
        assert code == 0
        h = float(next(csv.DictReader(open(tmp_path / "b" / "family.csv")))["H"])
        assert h == pytest.approx(1 / math.sin(0.5), rel=1e-12)

    def test_bad_spec(self, tmp_path, capsys):
        spec = tmp_path / "bad.spec"
        spec.write_text("this line has no equals sign\n")
        code, _, err = _run(["family", "--spec", spec], capsys)
        assert code == 2
        _single_error_line(err)

    def test_missing_spec(self, tmp_path, capsys):
        code, _, err = _run(["family", "--spec", tmp_path / "missing"], capsys)
        assert code == 1
        assert "code=io-error" in _single_error_line(err)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bubblelab.cli", "family", "--s1", "9",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    _single_error_line(proc.stderr)
