import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from instances import F_H
from slc.cli import main
from slc.distributions import KernelSpec, write_kernel
from slc.polynomial import write_polynomial


@pytest.fixture
def diag49(tmp_path):
    path = tmp_path / "diag49.txt"
    with open(path, "w") as fh:
        write_kernel(KernelSpec(np.diag([4.0, 9.0])), fh)
    return str(path)


@pytest.fixture
def kernel6(tmp_path):
    path = tmp_path / "k6.txt"
    assert main(["gen-kernel", "--n", "6", "--seed", "3", "--out", str(path)]) == 0
    return str(path)


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_optimize_brute_diag49(diag49, capsys):
    code, out = run(["optimize", "--algo", "brute", "--k", "2", "--kernel", diag49], capsys)
    res = json.loads(out)
    assert code == 0 and res["selected"] == [0, 1] and res["value"] == pytest.approx(6.0)


@pytest.mark.parametrize("algo", ["distorted", "monotone", "double"])
def test_optimize_reports_bound(kernel6, capsys, algo):
    code, out = run(["optimize", "--algo", algo, "--k", "3", "--kernel", kernel6, "--runs", "20"], capsys)
    res = json.loads(out)
    assert code == 0 and res["bound"] is not None and res["bound_satisfied"] is True


def test_verify_homogenization_counterexample(tmp_path, capsys):
    path = tmp_path / "f_h.txt"
    with open(path, "w") as fh:
        write_polynomial(F_H, fh)
    code, out = run(["verify", str(path)], capsys)
    res = json.loads(out)
    assert code == 0 and res["is_slc"] is False
    assert res["eigenvalues"] == pytest.approx([-3.114, 0.4095, 4.7047], abs=1e-3)


def test_sample_zero_steps_single_row(kernel6, tmp_path, capsys):
    out = tmp_path / "s"
    code, _ = run(["sample", "--kernel", kernel6, "--d", "3", "--steps", "0", "--out", str(out)], capsys)
    lines = (out / "chain_0.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "step,k,stat,accepted" and len(lines) == 2


def test_sample_then_diagnose(kernel6, tmp_path, capsys):
    out = tmp_path / "s"
    argv = ["sample", "--kernel", kernel6, "--d", "3", "--steps", "3000", "--chains", "3",
            "--init", "spread", "--out", str(out)]
    code, text = run(argv, capsys)
    assert code == 0 and len(text.splitlines()) == 3
    traces = [str(out / f"chain_{i}.csv") for i in range(3)]
    code, text = run(["diagnose", *traces, "--check-every", "500", "--out", str(tmp_path / "p.csv")], capsys)
    assert code == 0 and text.startswith("mixed_at=")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "iteration,rhat"


def test_config_file_defaults_and_precedence(kernel6, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# defaults\nkernel = {kernel6}\nd = 3\nsteps = 50\nseed = 1\n")
    a, b, c = (tmp_path / x for x in "abc")
    assert main(["--config", str(cfg), "sample", "--out", str(a)]) == 0
    assert main(["sample", "--kernel", kernel6, "--d", "3", "--steps", "50", "--seed", "1", "--out", str(b)]) == 0
    assert main(["--config", str(cfg), "sample", "--seed", "2", "--out", str(c)]) == 0
    capsys.readouterr()
    assert digest(a / "chain_0.csv") == digest(b / "chain_0.csv")
    assert digest(a / "chain_0.csv") != digest(c / "chain_0.csv")


@pytest.mark.parametrize("argv", [
    [],
    ["figure1", "--d", "5"],
    ["figure1", "--n", "10", "--d", "2", "--spectrum", "bogus"],
    ["compare-proposals", "--n", "10", "--d", "2", "--spectrum", "bogus"],
    ["optimize", "--algo", "greedy", "--kernel", "x"],
    ["optimize", "--algo", "brute", "--kernel", "x", "--gamma", "big"],
    ["figure1", "--n", "10", "--d", "a,b"],
    ["--config", "/nonexistent.cfg", "sample"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_semantic_usage_errors_exit_2(kernel6, tmp_path):
    for argv in (["gen-kernel", "--n", "0"],
                 ["sample", "--kernel", kernel6, "--d", "9", "--steps", "1"],
                 ["sample", "--kernel", kernel6, "--d", "3", "--steps", "-1"],
                 ["optimize", "--algo", "brute", "--kernel", kernel6, "--d", "2", "--k", "3"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_runtime_failures_exit_1(kernel6, tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2\n3 x\n")
    assert main(["optimize", "--algo", "brute", "--kernel", str(tmp_path / "missing.txt")]) == 1
    assert main(["optimize", "--algo", "brute", "--kernel", str(bad)]) == 1
    assert main(["verify", str(tmp_path / "missing.txt")]) == 1
    assert main(["optimize", "--algo", "double", "--kernel", kernel6, "--d", "3"]) == 1
    assert main(["figure1", "--n", "5", "--d", "9", "--out", str(tmp_path / "f")]) == 1
    assert "slc: error" in capsys.readouterr().err


def test_figure1_small_writes_files(tmp_path, capsys):
    out = tmp_path / "fig"
    code, text = run(["figure1", "--n", "8", "--d", "2,4", "--check-every", "50", "--max-steps", "20000",
                      "--out", str(out)], capsys)
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["mixtime.csv", "psrf_d2.csv", "psrf_d4.csv"]
    assert (out / "mixtime.csv").read_text().splitlines()[0] == "d,mixed_at"
    assert text.splitlines()[0].startswith("d=2 mixed_at=")


def test_figure2_and_compare_write_files(tmp_path, capsys):
    out = tmp_path / "fig2"
    assert main(["figure2", "--n", "6,8", "--d", "3", "--check-every", "50", "--max-steps", "20000",
                 "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["mixtime.csv", "psrf_n6.csv", "psrf_n8.csv"]
    assert main(["compare-proposals", "--n", "8", "--d", "3", "--seeds", "0,1", "--check-every", "50",
                 "--max-steps", "20000", "--out", str(out)]) == 0
    rows = (out / "compare.csv").read_text().splitlines()
    assert rows[0] == "seed,mixed_at_mu,mixed_at_hd" and len(rows) == 3
    capsys.readouterr()


def test_module_entry_point_and_hash_seed(tmp_path):
    outs = []
    for hs in ("0", "123"):
        out = tmp_path / hs
        env = dict(os.environ, PYTHONHASHSEED=hs)
        proc = subprocess.run([sys.executable, "-m", "slc", "figure1", "--n", "8", "--d", "3", "--check-every", "50",
                               "--max-steps", "5000", "--out", str(out)], env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append({p.name: digest(p) for p in out.iterdir()})
    assert outs[0] == outs[1]


def test_sample_reports_mixing_bound_only_when_enumerable(tmp_path, capsys):
    kernel = tmp_path / "k10.txt"
    assert main(["gen-kernel", "--n", "10", "--seed", "1", "--out", str(kernel)]) == 0
    capsys.readouterr()
    _, out = run(["sample", "--kernel", str(kernel), "--d", "8", "--steps", "5", "--out", str(tmp_path)], capsys)
    assert json.loads(out)["mixing_time_bound"] > 0
    _, out = run(["sample", "--kernel", str(kernel), "--d", "3", "--steps", "5", "--out", str(tmp_path)], capsys)
    assert json.loads(out)["mixing_time_bound"] is None
    with pytest.raises(SystemExit):
        main(["sample", "--kernel", str(kernel), "--d", "8", "--steps", "5", "--epsilon", "1.5"])
