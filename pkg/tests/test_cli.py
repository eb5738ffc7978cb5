import json
import subprocess
import sys

import pytest

from adaptomo.cli import PlanFile, bundled_plans, main, parse_angle


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def tiny_plan(tmp_path, **overrides):
    doc = {
        "true_direction": [0.490, -0.631, 0.602],
        "s_grid": [0.0, 0.6],
        "strategies": [
            {"name": "standard", "kind": "standard", "N": 300},
            {"name": "adaptive", "kind": "adaptive", "N": 300, "N1": 90},
        ],
        "repetitions": 40,
        "master_seed": 3,
        "figure_of_merit": "mse",
    }
    doc.update(overrides)
    path = tmp_path / "tiny.plan"
    path.write_text(json.dumps(doc))
    return path


class TestBound:
    def test_mse(self, capsys):
        code, out, _ = run(capsys, "bound", "--fom", "mse", "--s", "0.9")
        assert code == 0
        row = out.splitlines()[-1].split()
        assert float(row[1]) == pytest.approx(5.933560, abs=1e-6)
        assert [float(x) for x in row[2:5]] == pytest.approx([0.410528, 0.410528, 0.178945], abs=1e-6)
        assert float(row[5]) == pytest.approx(6.57)

    def test_bures(self, capsys):
        code, out, _ = run(capsys, "bound", "--fom", "wmse", "--n", "1", "--s", "0.5")
        row = out.splitlines()[-1].split()
        assert code == 0
        assert float(row[1]) == pytest.approx(2.25)
        assert [float(x) for x in row[2:5]] == pytest.approx([1 / 3] * 3, abs=1e-6)

    def test_grid(self, capsys):
        code, out, _ = run(capsys, "bound", "--s-grid", "0:0.9:0.3")
        assert code == 0
        assert len(out.splitlines()) == 2 + 4

    def test_out_of_range(self, capsys):
        code, _, err = run(capsys, "bound", "--fom", "mse", "--s", "1.5")
        assert code == 2
        assert "[0, 1]" in err


class TestFisher:
    def test_mub(self, capsys):
        code, out, _ = run(capsys, "fisher", "--s", "0,0,0", "--axis", "x", "--axis", "y", "--axis", "z")
        assert code == 0
        assert "tr(J^-1 I) = 1  " in out and "PASS" in out

    def test_single_axis(self, capsys):
        code, out, _ = run(capsys, "fisher", "--s", "0,0,0.9", "--axis", "0,0,1")
        assert code == 0 and "PASS" in out
        assert "tr(J^-1 I) = 1" in out

    def test_subnormalized(self, capsys):
        code, out, _ = run(capsys, "fisher", "--axis", "x:0.25", "--axis", "y:0.25")
        assert code == 0 and "tr(J^-1 I) = 0.5 " in out

    def test_invalid_axes(self, capsys):
        assert run(capsys, "fisher", "--axis", "0,0,0")[0] == 2
        assert run(capsys, "fisher", "--axis", "q")[0] == 2
        assert run(capsys, "fisher", "--axis", "x:0.8", "--axis", "y:0.8")[0] == 2


class TestErrorBudget:
    def test_reference(self, capsys):
        code, out, _ = run(capsys, "error-budget", "--reference-defaults")
        assert code == 0
        rows = {line.split()[0]: float(line.split()[1]) for line in out.splitlines()[1:]}
        assert rows["beta"] == pytest.approx(6.25e-8, rel=1e-3)
        assert rows["eta"] == pytest.approx(3e-6, rel=1e-3)
        assert rows["phases"] == pytest.approx(5.483e-5, rel=1e-3)
        assert rows["angles"] == pytest.approx(2.071e-4, rel=1e-3)
        assert rows["total"] == pytest.approx(2.650e-4, rel=1e-3)
        assert run(capsys, "error-budget", "--paper-defaults")[1] == out

    def test_zero_and_uncalibrated_phase(self, capsys):
        code, out, _ = run(capsys, "error-budget")
        assert code == 0 and float(out.splitlines()[-1].split()[1]) == 0.0
        code, out, _ = run(capsys, "error-budget", "--delta-unc", "1.2deg")
        phases = [line for line in out.splitlines() if line.startswith("phases")][0]
        assert float(phases.split()[1]) == pytest.approx(8.773e-4, rel=1e-3)

    def test_negative_uncertainty(self, capsys):
        assert run(capsys, "error-budget", "--eta-unc", "-0.1")[0] == 2


class TestSimulate:
    def test_writes_reports(self, capsys, tmp_path):
        plan = tiny_plan(tmp_path)
        code, out, _ = run(capsys, "simulate", str(plan), "--out", str(tmp_path / "r"))
        assert code == 0
        assert len(out.splitlines()) == 4 + 1
        rows = (tmp_path / "r.csv").read_text().splitlines()
        assert rows[0] == "s,strategy,fom,N,N1,scaled_error,sem,reps"
        assert len(rows) == 1 + 4
        json.loads((tmp_path / "r.json").read_text())

    def test_threads_byte_identical(self, capsys, tmp_path):
        plan = tiny_plan(tmp_path)
        assert run(capsys, "simulate", str(plan), "--out", str(tmp_path / "a"), "--threads", "1")[0] == 0
        assert run(capsys, "simulate", str(plan), "--out", str(tmp_path / "b"), "--threads", "8")[0] == 0
        for ext in ("json", "csv"):
            assert (tmp_path / f"a.{ext}").read_bytes() == (tmp_path / f"b.{ext}").read_bytes()

    def test_plan_failures(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", str(tiny_plan(tmp_path, repetitions=0)), "--out", str(tmp_path / "r"))
        assert code == 1 and "repetitions" in err
        code, _, err = run(capsys, "simulate", str(tiny_plan(tmp_path, flavour=1)), "--out", str(tmp_path / "r"))
        assert code == 1 and "flavour" in err
        (tmp_path / "bad.plan").write_text("{not json")
        assert run(capsys, "simulate", str(tmp_path / "bad.plan"), "--out", str(tmp_path / "r"))[0] == 1
        assert run(capsys, "simulate", str(tmp_path / "missing.plan"), "--out", str(tmp_path / "r"))[0] == 1

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", str(tiny_plan(tmp_path)), "--out", str(tmp_path / "nope" / "r"))
        assert code == 1 and "cannot write" in err

    def test_bad_threads(self, capsys, tmp_path):
        assert run(capsys, "simulate", str(tiny_plan(tmp_path)), "--threads", "0")[0] == 2


class TestPlans:
    def test_bundled_roundtrip(self):
        plans = bundled_plans()
        assert set(plans) == {"fig3.plan", "fig4-upper.plan", "fig4-lower.plan"}
        for text in plans.values():
            once = PlanFile.loads(text)
            twice = PlanFile.loads(once.dumps())
            assert twice == once
            assert twice.dumps() == once.dumps()

    def test_bundled_contents(self):
        fig3 = PlanFile.loads(bundled_plans()["fig3.plan"]).plan
        assert len(fig3.s_grid) == 8 and fig3.s_grid[-1] == 0.98
        assert [e.config.kind for e in fig3.strategies] == ["standard", "adaptive", "known-state"]
        assert fig3.repetitions == 4000
        assert fig3.true_direction == (0.490, -0.631, 0.602)
        upper = PlanFile.loads(bundled_plans()["fig4-upper.plan"]).plan
        assert {e.config.N for e in upper.strategies} == {1200}
        lower = PlanFile.loads(bundled_plans()["fig4-lower.plan"]).plan
        assert len(lower.strategies) == 12

    def test_angles(self):
        assert parse_angle("180deg") == pytest.approx(3.141592653589793)
        assert parse_angle("0.5rad") == 0.5
        assert parse_angle("0.25") == 0.25
        with pytest.raises(ValueError):
            parse_angle("ten degrees")


class TestBlackBox:
    @pytest.mark.parametrize("argv, code", [
        (["bound", "--s", "0.3"], 0),
        (["bound", "--s", "abc"], 2),
        (["bound", "--fom", "wmse", "--s", "0.3"], 2),
        (["frobnicate"], 2),
        ([], 2),
        (["error-budget", "--reference-defaults", "--s-len", "0.5"], 0),
        (["simulate", "no-such-plan"], 1),
    ])
    def test_exit_codes(self, argv, code):
        proc = subprocess.run([sys.executable, "-m", "adaptomo", *argv], capture_output=True, text=True)
        assert proc.returncode == code, proc.stderr
