import json

from btverify.cli import main

from conftest import CORPUS


def btf(name):
    return str(CORPUS / name)


def test_compile_reports_process_count(capsys):
    assert main(["compile", btf("drone.btf")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("41 processes")


def test_compile_out_dir(tmp_path, capsys):
    out = tmp_path / "model"
    assert main(["compile", btf("recovery.btf"), "--out", str(out)]) == 0
    assert (out / "model.txt").exists()
    assert list(out.glob("*.dot"))


def test_missing_input_file():
    assert main(["compile", "no_such_file.btf"]) == 2


def test_invalid_input_file(tmp_path, capsys):
    bad = tmp_path / "bad.btf"
    bad.write_text("((BehaviorTree (Action :name a) (Action :name a)))")
    assert main(["compile", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_check_matches_expectations(tmp_path, capsys):
    report = tmp_path / "report.txt"
    code = main(["check", btf("recovery.btf"),
                 "--props", btf("recovery.props"), "--out", str(report)])
    assert code == 0
    assert report.exists()
    assert "TRUE" in report.read_text()


def test_check_expect_mismatch(tmp_path, capsys):
    props = tmp_path / "wrong.props"
    props.write_text(
        "property impossible is present node(action)@nonexistent_is_fine"
        .replace("@nonexistent_is_fine", "@halted expect: TRUE"))
    code = main(["check", btf("recovery.btf"), "--props", str(props)])
    assert code == 3


def test_check_state_limit(capsys):
    code = main(["check", btf("recovery.btf"), "--max-states", "10"])
    assert code == 4


def test_run_success_and_failure(tmp_path, capsys):
    ok = tmp_path / "ok.script"
    ok.write_text("node action ordinal 1 -> success latency 0\n")
    assert main(["run", btf("recovery.btf"), "--script", str(ok),
                 "--tick-ms", "0", "--max-ticks", "20"]) == 0

    bad = tmp_path / "bad.script"
    bad.write_text("node action ordinal 1 -> failure latency 0\n"
                   "node recov ordinal 1 -> failure latency 0\n"
                   "node action ordinal 2 -> failure latency 0\n")
    assert main(["run", btf("recovery.btf"), "--script", str(bad),
                 "--tick-ms", "0", "--max-ticks", "20"]) == 1


def test_run_stopped_exit_code(tmp_path, capsys):
    script = tmp_path / "slow.script"
    script.write_text("node action ordinal 1 -> success latency 99\n")
    assert main(["run", btf("recovery.btf"), "--script", str(script),
                 "--tick-ms", "0", "--max-ticks", "3"]) == 5


def test_run_trace_jsonl_stdout(tmp_path, capsys):
    script = tmp_path / "ok.script"
    script.write_text("node action ordinal 1 -> success latency 1\n")
    code = main(["run", btf("recovery.btf"), "--script", str(script),
                 "--tick-ms", "0", "--max-ticks", "20",
                 "--trace", "-", "--format", "jsonl"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    records = [json.loads(line) for line in lines if line.startswith("{")]
    assert any(r.get("kind") == "root_terminal" for r in records)


def test_graph_dump(tmp_path, capsys):
    out = tmp_path / "graph.txt"
    assert main(["graph", btf("recovery.btf"), "--out", str(out)]) == 0
    assert "states" in capsys.readouterr().out
    assert out.read_text()


def test_repeated_check_reports_identical(tmp_path):
    reports = []
    path = tmp_path / "report.txt"
    for _ in range(2):
        main(["check", btf("roundrobin.btf"),
              "--props", btf("roundrobin.props"), "--out", str(path)])
        reports.append(path.read_bytes())
    assert reports[0] == reports[1]
