"""End-to-end tests for the command-line entry point."""

import json

import pytest
from sqlalchemy.exc import SQLAlchemyError

from src.core.logging import configure_logging
from src.main import build_parser, load_scenario, main
from src.models.metrics import CSV_COLUMNS
from src.services.results_export import results_exporter
from src.services.results_store import results_store


@pytest.fixture(autouse=True)
def reset_logging():
    # main() binds the log stream to this test's captured stderr
    yield
    configure_logging("WARNING")


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "tiny.conf"
    path.write_text("num_nodes = 12\nhorizon_s = 5\nmax_cf_nodes = 3\n")
    return path


def test_flags_override_the_scenario_file(scenario_file):
    args = build_parser().parse_args(
        ["run", "--config", str(scenario_file), "--vmax", "10", "--bw-size", "50", "--trust", "off"]
    )

    config = load_scenario(args)

    assert (config.num_nodes, config.vmax, config.max_bw_size) == (12, 10.0, 50)
    assert not config.trust_enabled


def test_trust_flag_rejects_other_values():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--trust", "maybe"])


def test_run_prints_the_row(scenario_file, tmp_path, capsys):
    out = tmp_path / "out"
    dump = tmp_path / "protocol.txt"

    code = main(["run", "--config", str(scenario_file), "--profiles", "2", "--out", str(out), "--trace-dump", str(dump)])

    assert code == 0
    row = json.loads(capsys.readouterr().out)
    assert row["num_profiles"] == 2
    assert row["config"]["num_nodes"] == 12
    assert (out / "run.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert dump.exists()


def test_gen_traces_then_replay(scenario_file, tmp_path, capsys):
    traces = tmp_path / "traces"

    assert main(["gen-traces", "--config", str(scenario_file), "--vmax", "3", "--profiles", "2", "--seed", "1", "--out", str(traces)]) == 0
    listed = json.loads(capsys.readouterr().out)["traces"]
    assert [p.rsplit("/", 1)[-1] for p in listed] == ["trace_v3_s1.txt", "trace_v3_s2.txt"]

    code = main(["run", "--config", str(scenario_file), "--trace-file", listed[0], "--out", str(tmp_path / "out")])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["num_profiles"] == 1


def test_sweep_and_emit_plots(scenario_file, tmp_path, capsys, db_url):
    out = tmp_path / "out"

    assert main(["sweep", "--config", str(scenario_file), "--profiles", "1", "--out", str(out), "--db-url", db_url]) == 0
    assert json.loads(capsys.readouterr().out)["rows"] == 8

    assert main(["emit-plots", "--csv", str(out / "sweep.csv"), "--out", str(out / "plots")]) == 0
    files = json.loads(capsys.readouterr().out)["files"]
    assert any(f.endswith("median_detect_rounds_v10_bw10.csv") for f in files)


def test_sweep_restricted_to_one_tree_type(scenario_file, tmp_path, capsys):
    out = tmp_path / "out"

    code = main(["sweep", "--config", str(scenario_file), "--profiles", "1", "--out", str(out), "--no-db", "--tree-type", "LET"])

    assert code == 0
    assert json.loads(capsys.readouterr().out)["rows"] == 4
    assert set(results_exporter.read_csv(out / "sweep.csv")["tree_type"]) == {"LET"}


def test_sweep_exits_nonzero_when_rows_cannot_be_stored(scenario_file, tmp_path, db_url, monkeypatch, capsys):
    def locked(session, row):
        raise SQLAlchemyError("database is locked")

    monkeypatch.setattr(results_store, "save_row", locked)

    code = main(["sweep", "--config", str(scenario_file), "--profiles", "1", "--out", str(tmp_path / "out"), "--db-url", db_url])

    assert code == 1
    assert "database is locked" in capsys.readouterr().err


def test_bad_scenario_exits_with_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.conf"
    path.write_text("pause_time = 3\n")

    assert main(["run", "--config", str(path)]) == 2
    assert "pause_time" in capsys.readouterr().err
