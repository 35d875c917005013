import io
import json
import subprocess
import sys

import pytest

from uncheatable.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def doc_of(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_exponent(capsys):
    code, doc = doc_of(capsys, "graph", "exponent", "--gamma", "7/15", "--lambda", "15/16", "--d", "4")
    assert code == 0
    assert doc["exponent"] <= -0.25
    assert "generated_at" in doc


def test_gen_then_verify(capsys, tmp_path, monkeypatch):
    path = tmp_path / "g.txt"
    assert run(capsys, "graph", "gen", "--n", "16", "--d", "4", "--seed", "1", "--out", str(path))[0] == 0
    code, doc = doc_of(capsys, "graph", "verify", str(path), "--alpha", "15/16", "--beta", "7/16", "--no-timestamp")
    assert code == (0 if doc["resilient"] else 1)
    assert doc["subset_size"] == 15 and doc["scc_threshold"] == 7

    # same graph piped through stdin
    code, text, _ = run(capsys, "graph", "gen", "--n", "16", "--d", "4", "--seed", "1")
    assert text == path.read_text()
    monkeypatch.setattr(sys, "stdin", io.StringIO(text))
    code2, doc2 = doc_of(capsys, "graph", "verify", "--alpha", "15/16", "--beta", "7/16", "--no-timestamp")
    assert (code2, doc2) == (code, doc)


def test_verify_edgeless_fails(capsys, tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("6 0\n")
    code, doc = doc_of(capsys, "graph", "verify", str(path), "--alpha", "1", "--beta", "1/3")
    assert code == 1 and doc["resilient"] is False


def test_verify_malformed_input(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 2\n0 1\n")
    code, _, err = run(capsys, "graph", "verify", str(path), "--alpha", "1", "--beta", "1/3")
    assert code == 2 and "error" in err


def scenario_file(tmp_path, **fields):
    path = tmp_path / "scenario.yaml"
    path.write_text("\n".join(f"{k}: {v}" for k, v in fields.items()) + "\n")
    return str(path)


def test_diagnose_three_round(capsys, tmp_path):
    path = scenario_file(tmp_path, participants=20, cheaters=1, seed=3)
    code, doc = doc_of(capsys, "diagnose", "3round", "--scenario", path)
    assert code == 0
    assert doc["ground_truth"]["exact_match"] == "yes"
    assert doc["ground_truth"]["false_accusations"] == 0


def test_diagnose_five_round(capsys, tmp_path):
    path = scenario_file(tmp_path, participants=40, cheaters=4)
    code, doc = doc_of(capsys, "diagnose", "5round", "--scenario", path, "--seed", "2")
    assert code == 0 and doc["ground_truth"]["exact_match"] == "yes"
    assert doc["scenario"]["seed"] == 2


def test_diagnose_refuses_out_of_contract(capsys, tmp_path):
    path = scenario_file(tmp_path, participants=20, cheaters=3)
    code, out, err = run(capsys, "diagnose", "3round", "--scenario", path)
    assert code == 2 and "refused" in err and out == ""
    code, doc = doc_of(capsys, "diagnose", "3round", "--scenario", path, "--allow-out-of-contract")
    assert code == 0 and doc["result"]["out_of_contract"]


def test_diagnose_is_byte_identical(capsys, tmp_path):
    path = scenario_file(tmp_path, participants=100, cheaters=5, strategy="random", seed=8)
    outs = [run(capsys, "--no-timestamp", "diagnose", "3round", "--scenario", path)[1] for _ in range(2)]
    assert outs[0] == outs[1]
    assert "generated_at" not in outs[0]


def test_diagnose_bad_config(capsys, tmp_path):
    path = scenario_file(tmp_path, participants=20, wizards=2)
    assert run(capsys, "diagnose", "3round", "--scenario", path)[0] == 2


def test_econ_commands(capsys):
    assert doc_of(capsys, "econ", "threshold", "--B", "1", "--U", "2", "--C", "2")[1]["threshold"] == 0.25
    assert doc_of(capsys, "econ", "threshold", "--B", "2", "--U", "1", "--C", "0")[1]["threshold"] == 0
    assert doc_of(capsys, "econ", "deter", "--B", "1", "--U", "2", "--C", "1", "--P", "1/2")[1]["cooperation_preferred"]
    sybil = doc_of(capsys, "econ", "sybil", "--t", "20", "--P", "0.5", "--G", "0.95")[1]
    assert sybil["replication_prob"] == pytest.approx(0.526, abs=5e-4)
    balance = doc_of(capsys, "econ", "balance")[1]["balance"]
    assert balance["P"] == pytest.approx(9 / 11, abs=1e-6)


def test_econ_rejects_p_above_g(capsys):
    assert run(capsys, "econ", "sybil", "--t", "1", "--P", "0.99", "--G", "0.5")[0] == 2


def test_simulate_delayed(capsys):
    code, doc = doc_of(capsys, "simulate", "delayed", "--population", "10000", "--coalition-fraction", "0.01",
                       "--n-tasks", "10000000", "--no-timestamp")
    assert code == 0
    assert doc["aggregate"]["catch_rate"]["mean"] == pytest.approx(0.99, abs=0.002)


def test_simulate_seed_sweep_and_csv(capsys):
    code, doc = doc_of(capsys, "simulate", "same_round", "--seeds", "0:3", "--n-tasks", "100000")
    assert [r["seed"] for r in doc["records"]] == [0, 1, 2]
    assert doc["aggregate"]["runs"] == 3
    code, text, _ = run(capsys, "simulate", "same_round", "--seeds", "0:2", "--n-tasks", "1000", "--csv")
    lines = text.splitlines()
    assert lines[0].startswith("mode,") and len(lines) == 3


def test_simulate_without_colluders(capsys):
    for mode in ("same_round", "delayed", "sybil"):
        code, doc = doc_of(capsys, "simulate", mode, "--coalition-fraction", "0", "--n-tasks", "2000",
                           "--population", "100")
        assert code == 0 and doc["aggregate"]["tasks_forged"] == 0


def test_simulate_config_errors(capsys, tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("simulation: {population: 2}\n")
    assert run(capsys, "simulate", "delayed", "--config", str(path))[0] == 2
    path.write_text("simulation: {popul: 2}\n")
    assert run(capsys, "simulate", "delayed", "--config", str(path))[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "uncheatable", "econ", "threshold", "--B", "1", "--U", "2",
                           "--C", "2", "--no-timestamp"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout) == {"command": "econ threshold", "threshold": 0.25, "undeterrable": False}
