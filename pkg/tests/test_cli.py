"""Exit codes and file formats of the command-line front end."""

import json

from rucon.cli import main


def test_run_clean_exit(capsys):
    code = main(["run", "--n", "5", "--t", "1", "--seed", "7",
                 "--sample-pattern"])
    out = capsys.readouterr().out
    assert code == 0
    assert "outcome: ('consensus'" in out


def test_run_invalid_parameters():
    assert main(["run", "--n", "4", "--t", "2", "--seed", "1"]) == 2


def test_run_validity(capsys):
    code = main(["run", "--n", "3", "--t", "0", "--seed", "1",
                 "--values", "a,b,c"])
    out = capsys.readouterr().out
    assert code == 0
    assert any(f"('consensus', '{v}')" in out for v in "abc")


def test_missing_subcommand_is_usage_error(capsys):
    assert main([]) == 2


def test_pattern_file_roundtrip(tmp_path, capsys):
    pattern = tmp_path / "pattern.jsonl"
    pattern.write_text(
        '{"agent": 5, "kind": "crash", "from_round": 1}\n'
        '{"agent": 5, "kind": "send", "peer": 1, "from_round": 1}\n')
    code = main(["run", "--n", "5", "--t", "1", "--seed", "3",
                 "--pattern", str(pattern)])
    out = capsys.readouterr().out
    assert code == 0
    assert "no_decision" in out


def test_batch(capsys):
    code = main(["batch", "--n", "5", "--t", "1", "--seed", "0",
                 "--runs", "5"])
    out = capsys.readouterr().out
    assert code == 0
    assert "5/5 runs clean" in out


def test_deviate_unknown_type():
    assert main(["deviate", "--n", "5", "--t", "1", "--seed", "0",
                 "--type", "99"]) == 2


def test_deviate_no_gain(capsys):
    code = main(["deviate", "--n", "5", "--t", "1", "--seed", "0",
                 "--type", "10", "--runs", "40"])
    out = capsys.readouterr().out
    assert code == 0
    assert "no profitable gain" in out


def test_deviate_param_forwarding(capsys):
    code = main(["deviate", "--n", "5", "--t", "1", "--seed", "0",
                 "--type", "5", "--runs", "20", "--param", "round=2"])
    out = capsys.readouterr().out
    assert code == 0
    assert "guesses:" in out


def _write_trace(tmp_path, capsys):
    trace = tmp_path / "run.jsonl"
    assert main(["run", "--n", "5", "--t", "1", "--seed", "7",
                 "--sample-pattern", "--trace", str(trace)]) == 0
    capsys.readouterr()
    return trace


def test_verify_trace_clean(tmp_path, capsys):
    trace = _write_trace(tmp_path, capsys)
    assert main(["verify-trace", str(trace)]) == 0
    assert "trace clean" in capsys.readouterr().out


def test_verify_trace_flags_disagreement(tmp_path, capsys):
    trace = _write_trace(tmp_path, capsys)
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    result = next(r for r in records if r["event"] == "result")
    decisions = result["payload"]["decisions"]
    key = next(k for k, v in decisions.items() if v in ("a", "b", "c"))
    decisions[key] = (set("abc") - {decisions[key]}).pop()
    trace.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    assert main(["verify-trace", str(trace)]) == 1
    assert "agreement" in capsys.readouterr().out


def test_verify_trace_flags_truncation(tmp_path, capsys):
    trace = _write_trace(tmp_path, capsys)
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    kept = [r for r in records if r["event"] != "result"]
    trace.write_text("\n".join(json.dumps(r) for r in kept) + "\n")
    assert main(["verify-trace", str(trace)]) == 1
    assert "termination" in capsys.readouterr().out


def test_verify_trace_unreadable(tmp_path, capsys):
    garbage = tmp_path / "garbage.jsonl"
    garbage.write_text("{not json\n")
    assert main(["verify-trace", str(garbage)]) == 2
    missing_meta = tmp_path / "meta.jsonl"
    missing_meta.write_text('{"event": "noise"}\n')
    assert main(["verify-trace", str(missing_meta)]) == 2
    assert main(["verify-trace", str(tmp_path / "absent.jsonl")]) == 2


def test_trace_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        assert main(["run", "--n", "5", "--t", "1", "--seed", "11",
                     "--sample-pattern", "--trace", str(path)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
