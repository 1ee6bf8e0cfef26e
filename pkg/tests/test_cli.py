import json

import pytest

from chainfuzz import cli

from conftest import corpus_meta
from pipeline_fixtures import record_cassette, write_config


@pytest.fixture(scope="module")
def gate_cli_bundle(tmp_path_factory, corpus_built):
    base = tmp_path_factory.mktemp("gate_cli")
    cassette = base / "cassette.jsonl"
    config_path = write_config(base / "config.toml", "magic_gate", base / "ws_record", cassette, budget_s=120.0)
    record_cassette("magic_gate", config_path, cassette)
    return {"base": base, "cassette": cassette, "config_path": str(config_path)}


def run_cli(*argv):
    return cli.main(list(argv))


def test_analyze_selected_chain_matches_oracle(gate_cli_bundle, tmp_path, capsys):
    code = run_cli("analyze", "--config", gate_cli_bundle["config_path"], "--workspace", str(tmp_path / "ws"))
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["selected_chain"] == corpus_meta("magic_gate")["known_chain"]
    chains_doc = json.loads((tmp_path / "ws" / "chains.json").read_text())
    assert chains_doc["schema"] == "chainfuzz-chains-v1"
    assert chains_doc["selected"] == corpus_meta("magic_gate")["known_chain"]
    assert (tmp_path / "ws" / "graph.json").exists()


def test_missing_target_function_is_usage_error(tmp_path, capsys):
    bad_config = tmp_path / "bad.toml"
    bad_config.write_text(
        f"""
[target]
source_root = "{tmp_path}"

[workspace]
path = "{tmp_path / 'ws'}"
"""
    )
    code = run_cli("analyze", "--config", str(bad_config))
    assert code == cli.EXIT_FAILURE


def test_run_end_to_end_exits_zero_on_exploit(gate_cli_bundle, tmp_path, capsys):
    ws = tmp_path / "ws"
    code = run_cli("run", "--config", gate_cli_bundle["config_path"], "--workspace", str(ws))
    assert code == cli.EXIT_EXPLOIT
    out = capsys.readouterr().out
    assert "I.E." in out
    report = json.loads((ws / "report.json").read_text())
    assert report["status"] == "I.E."
    assert report["target"] == "process_payload"


def test_run_resume_is_idempotent(gate_cli_bundle, tmp_path):
    ws = tmp_path / "ws"
    assert run_cli("run", "--config", gate_cli_bundle["config_path"], "--workspace", str(ws)) == 0
    first = (ws / "report.json").read_text()
    cassette_before = gate_cli_bundle["cassette"].read_text()
    assert run_cli("run", "--config", gate_cli_bundle["config_path"], "--workspace", str(ws)) == 0
    assert gate_cli_bundle["cassette"].read_text() == cassette_before  # replay never writes
    second = (ws / "report.json").read_text()
    assert json.loads(second)["status"] == json.loads(first)["status"]


def test_run_harness_only_ablation_skips_generation(gate_cli_bundle, tmp_path):
    ws = tmp_path / "ws"
    code = run_cli(
        "run",
        "--config",
        gate_cli_bundle["config_path"],
        "--workspace",
        str(ws),
        "--ablation",
        "harness-only",
        "--budget",
        "8",
        "--max-execs",
        "30",
    )
    assert code == cli.EXIT_TIMEOUT  # default seed + havoc cannot find the magic in 30 execs
    assert not (ws / "seeds").exists()
    assert not (ws / "mutator").exists()
    report = json.loads((ws / "report.json").read_text())
    assert report["status"] == "T.O."


def test_stage_commands_write_their_artifacts(gate_cli_bundle, tmp_path):
    ws = tmp_path / "ws"
    config = gate_cli_bundle["config_path"]
    assert run_cli("conditions", "--config", config, "--workspace", str(ws)) == 0
    assert (ws / "conditions.json").exists()
    assert not (ws / "harness").exists()
    assert run_cli("harness", "--config", config, "--workspace", str(ws)) == 0
    assert (ws / "harness" / "harness.inst").exists()
    assert run_cli("seed", "--config", config, "--workspace", str(ws)) == 0
    assert (ws / "seeds" / "seed.bin").exists()
    assert run_cli("mutator", "--config", config, "--workspace", str(ws)) == 0
    assert (ws / "mutator" / "mutator.so").exists()
    assert run_cli("fuzz", "--config", config, "--workspace", str(ws)) == 0
    assert (ws / "report.json").exists()


def test_report_rerenders_without_rerun(gate_cli_bundle, tmp_path, capsys):
    ws = tmp_path / "ws"
    assert run_cli("run", "--config", gate_cli_bundle["config_path"], "--workspace", str(ws)) == 0
    capsys.readouterr()
    report_before = json.loads((ws / "report.json").read_text())
    (ws / "report.json").unlink()
    assert run_cli("report", "--workspace", str(ws), "--format", "both") == 0
    out = capsys.readouterr().out
    assert "status" in out and "TTE" in out
    report_after = json.loads((ws / "report.json").read_text())
    assert report_after["status"] == report_before["status"]
    assert report_after["tte_seconds"] == report_before["tte_seconds"]
    assert report_after["hit_rate"] == report_before["hit_rate"]


def test_report_json_and_table_numbers_agree(gate_cli_bundle, tmp_path, capsys):
    ws = tmp_path / "ws"
    assert run_cli("run", "--config", gate_cli_bundle["config_path"], "--workspace", str(ws)) == 0
    capsys.readouterr()
    assert run_cli("report", "--workspace", str(ws), "--format", "both") == 0
    out = capsys.readouterr().out
    table, json_part = out.split("{", 1)
    report = json.loads("{" + json_part)
    assert report["status"] in table
    assert f"{report['ts_seconds']:.2f}" in table
    assert f"{report['tte_seconds']:.2f}" in table
    assert report["hit_rate"]["formatted"] in table
    assert str(report["queue_entries"]) in table


def test_report_on_empty_workspace_fails(tmp_path):
    assert run_cli("report", "--workspace", str(tmp_path / "nothing")) == cli.EXIT_FAILURE
