import json
import os

import pytest

from fracstefan import eta_solve
from fracstefan.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, main
from fracstefan.parsing import OUTPUT_DIR_ENV

# Small but complete solves:
SMALL = ["--n", "16", "--dt", "0.05", "--T", "0.3", "--b", "0.5", "--output-every", "2"]


@pytest.fixture(autouse=True)
def no_output_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)


def test_eta(capsys):
    assert main(["eta", "--alpha", "0.5", "--h0", "1"]) == EXIT_OK
    fields = capsys.readouterr().out.strip().split(",")
    assert len(fields) == 4
    assert float(fields[0]) == 0.5 and float(fields[1]) == 1.0
    assert float(fields[2]) == pytest.approx(eta_solve(0.5, 1.0), rel=1e-12)
    assert abs(float(fields[3])) <= 1e-10


def test_solve_is_reproducible(tmp_path, capsys):
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["solve", *SMALL, "-o", str(first)]) == EXIT_OK
    assert main(["solve", *SMALL, "-o", str(second)]) == EXIT_OK
    assert "s_final=" in capsys.readouterr().out

    for name in ("front.csv", "path.csv", "grid.csv", "v_frames.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    manifests = [json.loads((d / "manifest.json").read_text(encoding="utf-8")) for d in (first, second)]
    assert manifests[0]["config_hash"] == manifests[1]["config_hash"]
    assert manifests[0]["config"]["output_dir"] == str(first)


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert main(["solve", *SMALL]) == EXIT_OK
    assert (tmp_path / "env" / "manifest.json").exists()


def test_config_file(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text(
        "schema = 1\nalpha = 0.4\nn_cells = 16\ndt = 0.05\nT = 0.3\nb = 0.5\n",
        encoding="utf-8",
    )
    output = tmp_path / "out"
    assert main(["--config", str(config), "solve", "--dump-weights", "-o", str(output)]) == EXIT_OK
    manifest = json.loads((output / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["problem"]["alpha"] == 0.4
    assert (output / "weights_flux.csv").exists()


@pytest.mark.parametrize(
    "argv, message",
    [
        (["solve", "--alpha", "1.5"], "alpha must lie in (0,1)"),
        (["solve", *SMALL[:-4], "--b", "0"], "b > 0"),
        (["solve", "--dt", "fast"], "invalid value 'fast' for dt"),
        (["benchmark", "--t0", "2", "--T", "1"], "t0 must lie in (0, T)"),
    ],
    ids=["alpha", "b", "dt", "t0"],
)
def test_configuration_errors(tmp_path, capsys, argv, message):
    assert main([*argv, "-o", str(tmp_path)]) == EXIT_CONFIG
    assert message in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "none.cfg"), "eta"]) == EXIT_CONFIG
    assert "cannot read configuration" in capsys.readouterr().err


def test_solver_error(tmp_path, capsys):
    # Explicit advection with a time step far above its stability bound
    argv = ["solve", "--n", "16", "--dt", "0.2", "--T", "2", "--b", "0.5", "--scheme", "imex"]
    assert main([*argv, "-o", str(tmp_path)]) == EXIT_SOLVER
    assert "advection bound" in capsys.readouterr().err


def test_verify(tmp_path, capsys):
    low, high = tmp_path / "low", tmp_path / "high"
    assert main(["solve", *SMALL, "--h0", "0.5", "-o", str(low)]) == EXIT_OK
    assert main(["solve", *SMALL, "--h0", "1", "-o", str(high)]) == EXIT_OK
    capsys.readouterr()

    loose = ["--tol-positivity", "1", "--tol-envelope", "1", "--tol-velocity", "1"]
    loose += ["--tol-ordering", "1e-4"]
    reports_dir = tmp_path / "reports"
    argv = ["verify", str(low), str(high), *loose, "-o", str(reports_dir)]
    assert main(argv) == EXIT_OK
    reports = json.loads((reports_dir / "reports.json").read_text(encoding="utf-8"))
    assert [r["name"] for r in reports].count("positivity") == 2
    assert reports[-1]["name"] == "front-ordering"
    assert "front-ordering" in capsys.readouterr().out

    # Reversed data ordering fails the ordering check:
    argv = ["verify", str(high), str(low), *loose, "-o", str(reports_dir)]
    assert main(argv) == EXIT_VERIFY
    reports = json.loads((reports_dir / "reports.json").read_text(encoding="utf-8"))
    assert reports[-1]["status"] == "fail"

    assert main(["verify", str(tmp_path / "missing"), "-o", str(reports_dir)]) == EXIT_CONFIG


def test_bzero(tmp_path, capsys):
    output = tmp_path / "bzero"
    argv = ["bzero", "--n", "16", "--dt", "0.05", "--T", "0.2", "--m", "4,8,16"]
    assert main([*argv, "-o", str(output)]) == EXIT_OK
    assert "order" in capsys.readouterr().out
    header = (output / "fronts.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,s_m4,s_m8,s_m16,s_extrapolated,error,sensitivity"
    assert sorted(name for name in os.listdir(output) if name.startswith("member_")) == [
        "member_m16",
        "member_m4",
        "member_m8",
    ]

    assert main([*argv, "--u0", "envelope", "-o", str(output)]) == EXIT_CONFIG


def test_sweep(tmp_path):
    output = tmp_path / "sweep"
    argv = ["sweep", *SMALL, "--key", "alpha", "--values", "0.3,0.6", "--workers", "2"]
    assert main([*argv, "-o", str(output)]) == EXIT_OK
    manifest = json.loads((output / "manifest.json").read_text(encoding="utf-8"))
    assert [member["name"] for member in manifest["members"]] == ["alpha=0.3", "alpha=0.6"]
    assert (output / "alpha=0.6" / "front.csv").exists()

    argv = ["sweep", *SMALL, "--key", "output_dir", "--values", "a,b"]
    assert main([*argv, "-o", str(output)]) == EXIT_CONFIG


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.startswith("fracstefan ")
