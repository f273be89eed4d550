from __future__ import annotations

import json
from pathlib import Path

import pytest

from geodesic_js.cli.config import CliConfig
from geodesic_js.cli.main import EXIT_ERROR, EXIT_OK, main
from geodesic_js.cli.render import event_style, render_event, render_point
from geodesic_js.geometry.tree import TreePoint
from geodesic_js.harness.output import read_csv
from geodesic_js.harness.report import Event, ExperimentError


def _write_config(path: Path, values: dict) -> Path:
    path.write_text(json.dumps(values), encoding="utf-8")
    return path


def test_tripod_command_writes_results(tmp_path: Path) -> None:
    assert main(["demo-tripod", "--out", str(tmp_path)]) == EXIT_OK

    text = (tmp_path / "demo-tripod.csv").read_text(encoding="utf-8")
    assert text.startswith("# config: ")
    config, rows = read_csv(tmp_path / "demo-tripod.csv")
    assert config["experiment"] == "demo-tripod"
    assert "workers" not in config and "out" not in config
    assert {row.estimator for row in rows} == {"d(A,B)", "d(A,C)", "tower_gap"}
    assert (tmp_path / "demo-tripod.json").exists()


def test_invalid_flags_exit_with_an_error(tmp_path: Path) -> None:
    assert main(["table1", "--reps", "0", "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["spd-bayes", "--oracle-reps", "500", "--out", str(tmp_path)]) == EXIT_ERROR
    assert not list(tmp_path.iterdir())


def test_unknown_config_key_exits_with_an_error(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "bad.json", {"reps": 10, "replicates": 10})

    assert main(["demo-tripod", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_ERROR


def test_unreadable_or_mismatched_config(tmp_path: Path) -> None:
    mismatched = _write_config(tmp_path / "other.json", {"experiment": "table1"})
    broken = tmp_path / "broken.json"
    broken.write_text("{reps: 3", encoding="utf-8")

    with pytest.raises(ExperimentError):
        CliConfig(command="demo-circle", config=mismatched).resolve()
    with pytest.raises(ExperimentError):
        CliConfig(command="demo-circle", config=broken).resolve()
    with pytest.raises(ExperimentError):
        CliConfig(command="demo-circle", config=tmp_path / "missing.json").resolve()
    with pytest.raises(ExperimentError):
        CliConfig(command="demo-circle", config=_write_config(tmp_path / "list.json", [1, 2])).resolve()


def test_flags_override_the_config_file(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "table1.json", {"experiment": "table1", "reps": 10, "seed": 3, "k_tau": 5})

    spec = CliConfig(command="table1", config=config, reps=5, workers=2).resolve()

    assert spec.reps == 5
    assert spec.seed == 3
    assert spec.k_tau == 5
    assert spec.workers == 2
    assert spec.oracle_reps == 100_000


def test_validate_command(tmp_path: Path) -> None:
    code = main(["validate", "--space", "circle", "--space", "euclidean", "--cases", "50", "--out", str(tmp_path)])

    assert code == EXIT_OK
    assert not list(tmp_path.iterdir())


def test_unknown_space_is_rejected_by_the_parser() -> None:
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--space", "hyperbolic"])
    assert exc.value.code == 2


def test_output_bytes_do_not_depend_on_workers(tmp_path: Path) -> None:
    common = ["demo-circle", "--reps", "600", "--seed", "17"]
    main([*common, "--workers", "1", "--out", str(tmp_path / "serial")])
    main([*common, "--workers", "2", "--out", str(tmp_path / "parallel")])

    serial = (tmp_path / "serial" / "demo-circle.csv").read_bytes()
    parallel = (tmp_path / "parallel" / "demo-circle.csv").read_bytes()
    assert serial == parallel
    assert json.loads((tmp_path / "serial" / "demo-circle.json").read_text())["config"]["reps"] == 600


def test_render_events() -> None:
    failed = Event("check", {"name": "gap > 0", "ok": False, "gap": 0.123456789})

    assert render_event(failed) == "[FAILED] gap > 0 (gap=0.123457)"
    assert event_style(failed) == "bold red"
    assert render_event(Event("validation_summary", {"suites": 5, "failed": 1})) == "4 of 5 suites passed."
    assert render_event(Event("unknown", {"a": 1})) == "unknown: {'a': 1}"
    assert render_point(TreePoint(0, 3, 0.5)) == "0.5 along (0, 3)"
    assert render_point(TreePoint(2, 2, 0.0)) == "vertex 2"
