"""End-to-end command line tests: every verb through ``main(argv)``."""

import json

import pytest

from conftest import SCENARIOS_DIR
from provchain import cli


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0, f"exit {code}, stderr: {err}"
    return json.loads(out)


@pytest.fixture
def ws(tmp_path, capsys):
    """Initialized deterministic workspace with two actors."""
    data = tmp_path / "work"
    run_json(
        ["init", "--data", data, "--seed", "9", "--clock-start", "2026-03-02T09:00:00Z"],
        capsys,
    )
    run_json(
        ["actor", "create", "--data", data, "--alias", "farm", "--role", "Producer"],
        capsys,
    )
    run_json(
        [
            "actor",
            "create",
            "--data",
            data,
            "--alias",
            "plant",
            "--role",
            "Manufacturer",
        ],
        capsys,
    )
    return data


def test_init_refuses_existing_workspace(tmp_path, capsys):
    data = tmp_path / "w"
    payload = run_json(["init", "--data", data, "--seed", "1"], capsys)
    assert payload["workspace"] == str(data)
    assert (data / "state.json").is_file()
    code, _, err = run(["init", "--data", data], capsys)
    assert code == 1
    assert err.startswith("ConfigInvalid:")


def test_verbs_persist_across_invocations(ws, capsys):
    produced = run_json(
        ["produce", "--data", ws, "--actor", "farm", "--attr", "kind=milk"], capsys
    )
    asset = produced["did"]

    run_json(["ship", "--data", ws, "--actor", "farm", "--asset", asset, "--to", "plant"], capsys)
    state = run_json(["state", "--data", ws, asset], capsys)
    assert state["status"] == "InTransit"

    run_json(["receive", "--data", ws, "--actor", "plant", "--asset", asset], capsys)
    made = run_json(
        [
            "manufacture",
            "--data",
            ws,
            "--actor",
            "plant",
            "--compartment",
            asset,
            "--attr",
            "kind=cheese",
        ],
        capsys,
    )
    product = made["did"]

    resolved = run_json(["resolve", "--data", ws, product], capsys)
    assert resolved["document"]["id"] == product

    versions = run_json(["versions", "--data", ws, asset], capsys)
    assert len(versions["versions"]) == 4  # produce, ship, receive, consume

    traced = run_json(["trace", "--data", ws, product], capsys)
    assert traced["root"] == product
    assert traced["verified"] is True
    assert len(traced["events"]) == 4

    tracked = run_json(["track", "--data", ws, asset], capsys)
    assert tracked["state"]["status"] == "Consumed"
    assert tracked["resolutionCount"] == 1

    run_json(
        ["withdraw", "--data", ws, "--actor", "plant", "--asset", product, "--deactivate"],
        capsys,
    )
    report = run_json(["cost-report", "--data", ws, "--json"], capsys)
    by_actor = {r["stakeholder"]: r for r in report["reports"]}
    assert by_actor["farm"]["totalCt"] == 75
    assert by_actor["plant"]["totalCt"] == 25 + 75 + 25 + 25

    verified = run_json(["verify-store", "--data", ws], capsys)
    assert verified["ok"] is True
    assert verified["objectsVerified"] == 5  # produce, ship, receive, manufacture, withdraw


def test_cost_report_table_format(ws, capsys):
    run_json(["produce", "--data", ws, "--actor", "farm"], capsys)
    code, out, err = run(["cost-report", "--data", ws], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split() == ["stakeholder", "creates", "updates", "deact", "CT", "USD"]
    assert any(line.startswith("farm") for line in lines)
    assert lines[-1].startswith("total")


def test_usage_errors_exit_2(ws, capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["produce", "--data", str(ws)])  # missing --actor
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["ship", "--data", str(ws), "--actor", "farm", "--asset", "not-a-did", "--to", "x"])
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["produce", "--data", str(ws), "--actor", "farm", "--attr", "no-equals"])
    assert excinfo.value.code == 2
    capsys.readouterr()


def test_domain_errors_exit_1(ws, capsys):
    code, _, err = run(
        ["ship", "--data", ws, "--actor", "farm", "--asset", "did:chain:missing", "--to", "plant"],
        capsys,
    )
    assert code == 1
    assert err.startswith("NotFound:")

    code, _, err = run(["produce", "--data", ws, "--actor", "nobody"], capsys)
    assert code == 1
    assert err.startswith("NotFound:")

    missing = run(["trace", "--data", ws / "nowhere", "did:chain:abc"], capsys)
    assert missing[0] == 1
    assert "no workspace" in missing[2]

    produced = run_json(["produce", "--data", ws, "--actor", "farm"], capsys)
    code, _, err = run(
        ["resolve", "--data", ws, produced["did"], "--version", "f" * 64], capsys
    )
    assert code == 1
    assert err.startswith("UnknownVersion:")


def test_actor_create_reports_settings(ws, capsys):
    payload = run_json(
        [
            "actor",
            "create",
            "--data",
            ws,
            "--alias",
            "shop",
            "--role",
            "Retailer",
            "--balance",
            "777",
            "--seed-hex",
            "ab" * 32,
        ],
        capsys,
    )
    assert payload["role"] == "Retailer"
    assert payload["balance"] == 777
    assert payload["did"].startswith("did:chain:")
    # duplicate alias surfaces as a clean exit-1 error
    code, _, err = run(
        ["actor", "create", "--data", ws, "--alias", "shop", "--role", "Retailer"],
        capsys,
    )
    assert code == 1
    assert "already registered" in err


def test_run_scenario_is_reproducible(tmp_path, capsys):
    script = SCENARIOS_DIR / "dairy.json"
    first = run_json(["run-scenario", str(script), "--data", tmp_path / "a"], capsys)
    second = run_json(["run-scenario", str(script), "--data", tmp_path / "b"], capsys)
    assert first == second
    assert first["events"] == 13
    assert first["feesCollected"] == 450
    assert first["opCounts"] == {"Create": 3, "Update": 12, "Deactivate": 0}

    state_a = (tmp_path / "a" / "state.json").read_bytes()
    state_b = (tmp_path / "b" / "state.json").read_bytes()
    assert state_a == state_b
    store_a = sorted(p.name for p in (tmp_path / "a" / "store").iterdir())
    store_b = sorted(p.name for p in (tmp_path / "b" / "store").iterdir())
    assert store_a == store_b and store_a
    for name in store_a:
        assert (tmp_path / "a" / "store" / name).read_bytes() == (
            tmp_path / "b" / "store" / name
        ).read_bytes()

    code, _, err = run(["run-scenario", str(script), "--data", tmp_path / "a"], capsys)
    assert code == 1
    assert "already exists" in err


def test_run_scenario_then_inspect(tmp_path, capsys):
    script = SCENARIOS_DIR / "dairy.json"
    data = tmp_path / "dairy"
    summary = run_json(["run-scenario", str(script), "--data", data], capsys)
    cheese = summary["assets"]["cheese"]
    traced = run_json(["trace", "--data", data, cheese], capsys)
    assert traced["verified"] is True
    assert len(traced["events"]) == 13  # every command links exactly one record
    report = run_json(["cost-report", "--data", data, "--json"], capsys)
    totals = {r["stakeholder"]: r["totalCt"] for r in report["reports"]}
    assert totals == {
        "alpine-farm": 75,
        "yeast-works": 75,
        "cold-chain": 50,
        "cheese-maker": 175,
        "corner-shop": 50,
        "customer-9": 25,
    }


def test_gen_scenario_deterministic_and_runnable(tmp_path, capsys):
    code, out_a, _ = run(["gen-scenario", "--seed", "12", "--events", "18"], capsys)
    assert code == 0
    code, out_b, _ = run(["gen-scenario", "--seed", "12", "--events", "18"], capsys)
    assert out_a == out_b
    script = json.loads(out_a)
    assert len(script["events"]) == 18
    assert script["name"] == "generated-12"

    out_file = tmp_path / "script.json"
    payload = run_json(
        ["gen-scenario", "--seed", "12", "--events", "18", "--out", out_file], capsys
    )
    assert payload == {"written": str(out_file), "events": 18}
    assert json.loads(out_file.read_text()) == script

    summary = run_json(
        ["run-scenario", out_file, "--data", tmp_path / "run"], capsys
    )
    assert summary["events"] == 18


def test_verify_store_flags_tampering(tmp_path, capsys):
    data = tmp_path / "t"
    run_json(["run-scenario", str(SCENARIOS_DIR / "dairy.json"), "--data", data], capsys)

    # corrupt one stored object on disk
    victim = next(p for p in sorted((data / "store").iterdir()))
    original = victim.read_bytes()
    victim.write_bytes(original[:-1] + bytes([original[-1] ^ 0x01]))
    code, _, err = run(["verify-store", "--data", data], capsys)
    assert code == 1
    assert err.startswith("IntegrityViolation:")
    victim.write_bytes(original)

    # splice an older body over a later version in the registry state
    state = json.loads((data / "state.json").read_text())
    documents = state["engine"]["registrar"]["documents"]
    did_text = next(
        text for text, rec in documents.items() if len(rec["versions"]) > 1
    )
    rec = documents[did_text]
    rec["versions"][1]["body"] = rec["versions"][0]["body"]
    (data / "state.json").write_text(json.dumps(state))
    report = run(["verify-store", "--data", data], capsys)
    assert report[0] == 1
    payload = json.loads(report[1])
    assert payload["ok"] is False
    assert any(did_text in line for line in payload["documentsFailed"])


def test_bench_commands_write_csv(tmp_path, capsys):
    out = tmp_path / "events.csv"
    summary = run_json(
        ["bench", "events", "--out", out, "--batch", "4", "--compartments", "2"],
        capsys,
    )
    assert summary["csv"] == str(out)
    header = out.read_text().splitlines()[0]
    assert header == "scenario_id,event_type,x,doc_ops_create,doc_ops_update,trace_resolutions,elapsed_ms"

    sweep_out = tmp_path / "sweep.csv"
    sweep = run_json(
        [
            "bench",
            "manufacture",
            "--out",
            sweep_out,
            "--sweep-max",
            "6",
            "--max-compartments",
            "3",
        ],
        capsys,
    )
    assert sweep["failedAt"] == 4
    assert sweep["failure"] == "CompartmentLimitExceeded"

    trace_out = tmp_path / "trace.csv"
    traced = run_json(
        ["bench", "trace", "--out", trace_out, "--assets", "5", "--sweep-max", "9"],
        capsys,
    )
    assert traced["resolutionFit"]["slope"] == pytest.approx(1.0)
    assert traced["resolutionFit"]["intercept"] == pytest.approx(1.0)
    assert traced["resolutionFit"]["rSquared"] == pytest.approx(1.0)
    assert len(trace_out.read_text().splitlines()) == 1 + traced["rows"]


def test_init_clock_start_validation(tmp_path, capsys):
    code, _, err = run(
        ["init", "--data", tmp_path / "x", "--clock-start", "yesterday"], capsys
    )
    assert code == 1
    assert err.startswith("ConfigInvalid:")
