import json

import numpy as np
import pytest

from ids_stability.cli import main
from ids_stability.criteria_lmi import build_th2_lmi
from ids_stability.lmi_core import check_witness
from ids_stability.model import IdsSystem, benchmark_system, save_system, validate_system


@pytest.fixture
def bench_file(tmp_path):
    def write(tau1, tau2, name="sys.json"):
        p = tmp_path / name
        p.write_text(save_system(benchmark_system(tau1, tau2)))
        return str(p)

    return write


def test_check_spectral_pass_and_fail(bench_file, capsys):
    assert main(["check", "--system", bench_file(0.3, 0.04), "--method", "spectral"]) == 0
    out = capsys.readouterr().out
    assert "verdict: pass" in out and "rho = " in out and "threshold = 0.5" in out
    assert main(["check", "--system", bench_file(0.3, 0.06), "--method", "spectral"]) == 1
    assert "verdict: fail" in capsys.readouterr().out


def test_check_missing_file_is_usage_error(capsys):
    assert main(["check", "--system", "no-such.json", "--method", "spectral"]) == 2
    assert "error:" in capsys.readouterr().err


def test_check_unknown_method_is_usage_error(bench_file):
    with pytest.raises(SystemExit) as exc:
        main(["check", "--system", bench_file(0.3, 0.04), "--method", "bogus"])
    assert exc.value.code == 2


def test_check_writes_reusable_witness(bench_file, tmp_path, capsys):
    out = tmp_path / "w.json"
    code = main(
        [
            "check",
            "--system",
            bench_file(0.3, 0.05),
            "--method",
            "th2-lmi",
            "--witness-out",
            str(out),
        ]
    )
    assert code == 0
    payload = {k: np.array(v) for k, v in json.loads(out.read_text()).items()}
    problem = build_th2_lmi(benchmark_system(0.3, 0.05))
    assert check_witness(problem, payload, tol=1e-9)


def test_check_weighted_with_explicit_alpha(bench_file, capsys):
    code = main(
        [
            "check",
            "--system",
            bench_file(0.4, 0.02),
            "--method",
            "spectral-weighted",
            "--alpha",
            "0.9,0.1",
        ]
    )
    assert code == 0
    assert "rho = 0.97834" in capsys.readouterr().out


def test_margin_command_values(bench_file, capsys):
    assert main(["margin", "--system", bench_file(0.2, 0.1), "--vary", "1", "--method", "amc"]) == 0
    val = float(capsys.readouterr().out.strip())
    assert abs(val - 0.1527) <= 2e-3
    assert (
        main(["margin", "--system", bench_file(0.4, 0.1), "--vary", "1", "--method", "spectral"])
        == 0
    )
    assert capsys.readouterr().out.strip() == "inf"


def test_margin_th2_lmi_small_row(bench_file, capsys):
    assert (
        main(["margin", "--system", bench_file(0.1, 0.1), "--vary", "1", "--method", "th2-lmi"])
        == 0
    )
    val = float(capsys.readouterr().out.strip())
    assert abs(val - 0.4882) <= 2e-3


def test_simulate_zero_system(tmp_path, capsys):
    sys_path = tmp_path / "zero.json"
    zero = validate_system(IdsSystem(A=(np.zeros((2, 2)),), tau=(0.4,)))
    sys_path.write_text(save_system(zero))
    out = tmp_path / "traj.csv"
    code = main(
        [
            "simulate",
            "--system",
            str(sys_path),
            "--h",
            "0.05",
            "--T",
            "3.0",
            "--history",
            "constant:1,0",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t, x1, x2"
    data = [list(map(float, l.split(", "))) for l in lines[1:] if not l.startswith("#")]
    post = [row for row in data if row[0] > 0]
    assert all(row[1] == 0.0 and row[2] == 0.0 for row in post)
    assert any(l.startswith("#") for l in lines)  # decay comments present


def test_simulate_bad_history_is_usage_error(bench_file, capsys):
    code = main(
        [
            "simulate",
            "--system",
            bench_file(0.3, 0.1),
            "--h",
            "0.01",
            "--T",
            "1.0",
            "--history",
            "wavelet:3",
        ]
    )
    assert code == 2
    assert "unknown history" in capsys.readouterr().err


def test_table1_cli_quick(tmp_path, capsys):
    out = tmp_path / "table.csv"
    code = main(["table1", "--tol", "2e-3", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "tau1, th2-lmi, amc, single, spectral"
    row04 = lines[1].split(", ")
    assert row04[0] == "0.4"
    assert row04[2] == "inf" and row04[3] == "inf" and row04[4] == "inf"
    assert abs(float(row04[1]) - 0.0317) <= 5e-3


def test_env_seed_override(monkeypatch):
    from ids_stability.cli import build_parser

    monkeypatch.setenv("IDS_STAB_SEED", "123")
    args = build_parser().parse_args(["selftest"])
    assert args.seed == 123
