import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from conmet.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

LINEAR = """
[system]
name = "linear"

[kernel]
k = 4
c = 0.9

[collocation]
grid = "hexagonal"
spacing = 0.4
box = [[-1.0, 1.0], [-1.0, 1.0]]

[triangulation]
box = [[-0.5, 0.5], [-0.5, 0.5]]
rho = 0.05

[verification]
eps0 = 0.1

[run]
mode = "strict"
max_iterations = 3
threads = 2
"""

ARTIFACTS = ["vertices.csv", "simplices.csv", "report_vertices.csv",
             "report_simplices.csv", "summary.json", "recovery.json"]


def write_config(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_linear_strict_run_verifies(tmp_path):
    cfg = write_config(tmp_path, LINEAR)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ARTIFACTS + ["run.log"]:
        assert (out / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verified"] is True
    assert summary["c1_fraction"] == 1.0 and summary["c4_fraction"] == 1.0


def test_run_is_deterministic_and_thread_invariant(tmp_path):
    cfg = write_config(tmp_path, LINEAR)
    outs = [tmp_path / f"out{i}" for i in range(3)]
    threads = ["2", "2", "4"]
    for out, t in zip(outs, threads):
        assert main(["run", "--config", str(cfg), "--out", str(out),
                     "--threads", t]) == 0
    for name in ARTIFACTS:
        ref = (outs[0] / name).read_bytes()
        assert (outs[1] / name).read_bytes() == ref
        assert (outs[2] / name).read_bytes() == ref


def test_solve_then_verify_round_trip(tmp_path):
    cfg = write_config(tmp_path, LINEAR)
    run_out = tmp_path / "run_out"
    assert main(["run", "--config", str(cfg), "--out", str(run_out)]) == 0

    solve_out = tmp_path / "solve_out"
    assert main(["solve", "--config", str(cfg), "--out", str(solve_out)]) == 0
    assert (solve_out / "collocation.csv").is_file()

    # point the verify pass at the solved recovery
    text = LINEAR.replace('[verification]',
                          '[verification]\nrecovery = "%s"'
                          % (solve_out / "recovery.json"))
    verify_cfg = write_config(tmp_path, text, name="verify.toml")
    verify_out = tmp_path / "verify_out"
    assert main(["verify", "--config", str(verify_cfg),
                 "--out", str(verify_out)]) == 0
    for name in ["vertices.csv", "simplices.csv", "report_vertices.csv",
                 "report_simplices.csv", "summary.json"]:
        assert (verify_out / name).read_bytes() == (run_out / name).read_bytes()


def test_malformed_config_exits_2_without_artifacts(tmp_path):
    cfg = write_config(tmp_path, "[system\nname =")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_config_exits_2(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(tmp_path / "nope.toml"),
                 "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_tables_exit_2(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, '[system]\nname = "linear"\n')
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    cfg2 = write_config(tmp_path, LINEAR.replace('name = "linear"',
                                                 'name = "no_such_system"'),
                        name="c2.toml")
    assert main(["run", "--config", str(cfg2), "--out", str(out)]) == 2
    assert not out.exists()


def test_verify_missing_recovery_exits_2(tmp_path):
    text = LINEAR.replace('[verification]',
                          '[verification]\nrecovery = "absent.json"')
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 2


def test_verify_system_name_mismatch_exits_2(tmp_path):
    cfg = write_config(tmp_path, LINEAR)
    solve_out = tmp_path / "solve_out"
    assert main(["solve", "--config", str(cfg), "--out", str(solve_out)]) == 0
    text = LINEAR.replace('name = "linear"', 'name = "vanderpol"')
    text = text.replace('[verification]',
                        '[verification]\nrecovery = "%s"'
                        % (solve_out / "recovery.json"))
    bad = write_config(tmp_path, text, name="bad.toml")
    out = tmp_path / "out"
    assert main(["verify", "--config", str(bad), "--out", str(out)]) == 2


def test_polynomial_system_route(tmp_path):
    text = LINEAR.replace(
        '[system]\nname = "linear"',
        '[system]\nname = "polynomial"\nlabel = "diag"\n'
        'components = [[[[1, 0], -1.0]], [[[0, 1], -1.0]]]')
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert json.loads((out / "summary.json").read_text())["verified"] is True


def test_strict_caps_exhausted_exits_4_with_artifacts(tmp_path):
    # triangulating the full collocation box cannot verify near the edge of
    # the data coverage, so one strict iteration must exit with code 4 while
    # still writing the failure maps
    text = LINEAR.replace("box = [[-0.5, 0.5], [-0.5, 0.5]]",
                          "box = [[-1.0, 1.0], [-1.0, 1.0]]")
    text = text.replace("rho = 0.05", "rho = 0.1")
    text = text.replace("max_iterations = 3", "max_iterations = 1")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 4
    for name in ARTIFACTS:
        assert (out / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verified"] is False
    assert summary["c4_fraction"] < 1.0


def test_relaxed_single_pass_reports_failures(tmp_path):
    text = LINEAR.replace("box = [[-0.5, 0.5], [-0.5, 0.5]]",
                          "box = [[-1.0, 1.0], [-1.0, 1.0]]")
    text = text.replace("rho = 0.05", "rho = 0.1")
    text = text.replace('mode = "strict"', 'mode = "relaxed"')
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    report = (out / "report_simplices.csv").read_text().strip().split("\n")
    fails = sum(1 for line in report[1:] if line.split(",")[6] == "0")
    assert fails > 0


def test_shipped_configs_parse(tmp_path):
    # every shipped configuration must at least load and build its system
    from conmet.cli import (_system_from_table, build_collocation,
                            load_config)
    for path in sorted(CONFIG_DIR.glob("*.toml")):
        cfg = load_config(path)
        _system_from_table(cfg["system"])
        assert "triangulation" in cfg
