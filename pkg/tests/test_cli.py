import json
import subprocess
import sys

import pytest
import yaml

from tddsim.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main
from tddsim.config import load_config, serialize_config

from conftest import SCENARIOS


def run_cli(*argv):
    return main(list(argv))


def test_validate_accepts_every_fixture(capsys, scenario_dir):
    for path in sorted(scenario_dir.glob("*.yaml")):
        assert run_cli("validate", "--config", str(path)) == EXIT_OK
        out = capsys.readouterr().out
        assert out.strip() == f"{path}: ok"


def test_validate_print_canonical(capsys):
    path = str(SCENARIOS / "two_node_dl.yaml")
    assert run_cli("validate", "--config", path, "--print-canonical") == EXIT_OK
    out = capsys.readouterr().out
    assert yaml.safe_load(out) is not None
    assert out == serialize_config(load_config(path))


def test_validate_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(
        "name: broken\n"
        "nodes:\n"
        "  - {id: ap, role: dn_ap, position: [0.0, 0.0]}\n"
        "  - {id: ap, role: mystery, position: [0.0, 0.0]}\n"
        "traffic:\n"
        "  - {link: ap-ghost, direction: downlink, demand_bps: -1, pattern: saturated}\n"
    )
    assert run_cli("validate", "--config", str(bad)) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "error: " in err
    # Every problem is reported, one line each.
    assert err.count("error: ") >= 4


def test_validate_missing_file(capsys):
    assert run_cli("validate", "--config", "/nonexistent.yaml") == EXIT_CONFIG
    assert "error: " in capsys.readouterr().err


def test_bf_reports_trained_pair(capsys):
    path = str(SCENARIOS / "two_node_dl.yaml")
    assert run_cli("bf", "--config", path) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["runs"]) == 1
    run = payload["runs"][0]
    assert run["mode"] == "individual"
    links = run["trained_links"]
    assert len(links) == 1
    assert links[0]["initiator_sector"] == 0
    assert links[0]["responder_sector"] == 4
    assert links[0]["snr_db"] == pytest.approx(22.642, abs=1e-3)
    # 8 tx sectors x 8 receive dwells per sector.
    assert payload["sweep_frames"] == {"dn1": 64}


def test_plan_feasible_scenario(capsys):
    path = str(SCENARIOS / "saturated_dl.yaml")
    assert run_cli("plan", "--config", path) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["feasible"] is True
    assert payload["starved"] == []
    assert payload["violations"] == []
    assert len(payload["slots"]) == 24
    granted = payload["granted_rate_bps"]["dn1-cn1:downlink"]
    # 22 DATA slots of 66 us per 1.6 ms interval at MCS12.
    assert granted == pytest.approx(22 * 66 / 1600 * 4.62e9)
    basic = [s for s in payload["slots"] if s["category"] == "basic"]
    assert basic[0]["links"] == ["dn1-cn1:uplink"]
    assert basic[1]["links"] == []


def test_plan_infeasible_exits_3(tmp_path, capsys):
    scenario = {
        "name": "too_far",
        "nodes": [
            {"id": "ap", "role": "dn_ap", "position": [0.0, 0.0]},
            {"id": "sta", "role": "cn_sta", "position": [50000.0, 0.0]},
        ],
        "beamforming": {
            "trained_links": [
                {"initiator": "ap", "responder": "sta",
                 "initiator_sector": 0, "responder_sector": 4},
            ],
        },
        "traffic": [
            {"link": "ap-sta", "direction": "downlink", "demand_bps": 1.0e9,
             "pattern": "saturated"},
        ],
    }
    path = tmp_path / "far.yaml"
    path.write_text(yaml.safe_dump(scenario))
    assert run_cli("plan", "--config", str(path)) == EXIT_INFEASIBLE
    payload = json.loads(capsys.readouterr().out)
    assert payload["feasible"] is False
    assert payload["starved"][0]["reason"] == "link SNR below the lowest MCS threshold"

    capsys.readouterr()
    assert run_cli("run", "--config", str(path)) == EXIT_INFEASIBLE
    payload = json.loads(capsys.readouterr().out)
    assert payload["error"] == "infeasible plan"


def test_run_writes_trace_and_metrics(tmp_path, capsys):
    path = str(SCENARIOS / "trickle.yaml")
    trace_path = tmp_path / "trace.jsonl"
    metrics_path = tmp_path / "metrics.csv"
    code = run_cli(
        "run", "--config", path, "--duration-ms", "50",
        "--trace", str(trace_path), "--metrics", str(metrics_path),
    )
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["scenario"] == "trickle"
    assert payload["duration_us"] == 50000
    link = payload["per_link"]["dn1-cn1:downlink"]
    assert link["completed_mpdus"] > 0
    assert link["max_latency_us"] < 1600 + 66

    lines = trace_path.read_text().strip().split("\n")
    records = [json.loads(line) for line in lines]
    assert records[0]["kind"] == "run_header"
    kinds = {r["kind"] for r in records}
    assert {"slot", "frame_tx", "frame_rx"} <= kinds
    # Sequence numbers are dense and times never decrease.
    assert [r["seq"] for r in records] == list(range(len(records)))
    times = [r["t"] for r in records]
    assert times == sorted(times)

    headers = metrics_path.read_text().split("\n")[0]
    assert headers.startswith("link,offered_bits,")


def test_run_validate_only_skips_simulation(capsys):
    path = str(SCENARIOS / "saturated_dl.yaml")
    assert run_cli("run", "--config", path, "--validate-only") == EXIT_OK
    assert capsys.readouterr().out.strip() == f"{path}: ok"


def test_run_rejects_bad_duration(capsys):
    path = str(SCENARIOS / "saturated_dl.yaml")
    assert run_cli("run", "--config", path, "--duration-ms", "-1") == EXIT_CONFIG
    assert "--duration-ms" in capsys.readouterr().err


def test_run_seed_override_lands_in_payload(capsys):
    path = str(SCENARIOS / "trickle.yaml")
    assert run_cli("run", "--config", path, "--duration-ms", "10",
                   "--seed", "99") == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["seed"] == 99


def test_repeat_runs_are_byte_identical(tmp_path, capsys):
    path = str(SCENARIOS / "two_node_dl.yaml")
    outputs = []
    for name in ("a", "b"):
        trace_path = tmp_path / f"{name}.jsonl"
        metrics_path = tmp_path / f"{name}.csv"
        assert run_cli(
            "run", "--config", path, "--trace", str(trace_path),
            "--metrics", str(metrics_path),
        ) == EXIT_OK
        outputs.append((
            capsys.readouterr().out,
            trace_path.read_bytes(),
            metrics_path.read_bytes(),
        ))
    assert outputs[0] == outputs[1]


def test_module_entry_point_runs():
    path = str(SCENARIOS / "two_node_dl.yaml")
    proc = subprocess.run(
        [sys.executable, "-m", "tddsim", "validate", "--config", path],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "ok" in proc.stdout
