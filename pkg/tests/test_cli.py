import json

import pytest

from aslide.adversaries import format_schedule
from aslide.cli import FORMAT_VERSION, main
from aslide.model import read_trace


def records(text):
    lines = [json.loads(line) for line in text.splitlines() if line.strip()]
    assert lines[0]["format"] == "aslide-report" and lines[0]["version"] == FORMAT_VERSION
    return lines


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("n = 8\nC = 64\nadversary = random\nseed = 4\nrounds = 100\n")
    return path


def test_run_writes_trace_and_summary(config, tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    sched = tmp_path / "s.txt"
    assert main(["run", "--config", str(config), "--trace", str(trace), "--emit-schedule", str(sched),
                 "--check"]) == 0
    out = records(capsys.readouterr().out)
    assert out[-1]["check"] == "summary" and out[-1]["rounds"] == 100
    assert len(read_trace(trace)) == 100
    assert len(sched.read_text().splitlines()) == 100


def test_run_is_reproducible(config, tmp_path, capsys):
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    outs = []
    for p in paths:
        main(["run", "--config", str(config), "--trace", str(p)])
        outs.append(capsys.readouterr().out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert outs[0] == outs[1]


def test_replay_flag_reproduces_run(config, tmp_path, capsys):
    sched, a, b = tmp_path / "s.txt", tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["run", "--config", str(config), "--trace", str(a), "--emit-schedule", str(sched)])
    main(["run", "-n", "8", "-C", "64", "--replay", str(sched), "--rounds", "500", "--trace", str(b)])
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_lowerbound_reports_every_cycle(capsys):
    assert main(["lowerbound", "-n", "6", "-C", "24", "--cycles", "4"]) == 0
    out = records(capsys.readouterr().out)
    cycles = [r for r in out if r.get("check") == "cycle"]
    assert [r["optimum"] for r in cycles] == [24, 48, 72, 96]
    assert cycles[0]["psi_before"] == "0"
    assert all(r["pass"] for r in cycles)


def test_compare_reports_checkpoints(capsys):
    assert main(["compare", "-n", "4", "-C", "128", "--protocol", "slide-plus", "--rounds", "600",
                 "--runs", "2"]) == 0
    out = records(capsys.readouterr().out)
    points = [r for r in out if r.get("check") == "checkpoint"]
    assert len(points) == 2 * 5  # 128, 256, 384, 512, 600 for each run
    assert all(r["bound"] == 32 * r["online"] + 16384 for r in points)
    assert out[-1]["pass"]


def test_compare_on_schedule_avoiding_receiver(tmp_path, capsys):
    sched = tmp_path / "s.txt"
    sched.write_text(format_schedule([(0, 1), (1, 2), (0, 2)] * 50))
    assert main(["compare", "-n", "4", "-C", "128", "--protocol", "slide-plus", "--rounds", "150",
                 "--replay", str(sched)]) == 0
    out = records(capsys.readouterr().out)
    run_rec = next(r for r in out if r.get("check") == "run")
    assert run_rec["online"] == run_rec["optimum"] == 0


def test_compare_semi_async_with_potential(capsys):
    assert main(["compare", "-n", "6", "-C", "24", "--adversary", "cyclic", "--rounds", "1200", "--phi"]) == 0
    out = records(capsys.readouterr().out)
    phi = next(r for r in out if r.get("check") == "phi")
    assert phi["stale"] == 0 and phi["below_weighted"] == 0


def test_oracle_prints_checkpoints(tmp_path, capsys):
    sched = tmp_path / "s.txt"
    sched.write_text(format_schedule([(0, 1), (1, 2)] * 5))
    assert main(["oracle", "-n", "3", "-C", "2", "--replay", str(sched), "--checkpoints", "2,6,10"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# aslide-oracle")
    assert lines[1:] == ["2 1", "6 3", "10 5"]


def test_verify_suite_passes(capsys):
    assert main(["verify", "family-lemmas", "--count", "50"]) == 0
    assert records(capsys.readouterr().out)[-1]["pass"]


def test_verify_flags_corrupted_trace(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    main(["run", "-n", "8", "-C", "64", "--rounds", "400", "--trace", str(trace)])
    lines = trace.read_text().splitlines()
    rec = json.loads(lines[299])
    rec["Z"] += 1
    lines[299] = json.dumps(rec)
    trace.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["verify", "slide-invariants", "--trace", str(trace)]) == 1
    bad = [r for r in records(capsys.readouterr().out) if r.get("pass") is False and "x" in r]
    assert bad[0]["x"] == 300 and bad[0]["check"] == "counters"


@pytest.mark.parametrize("argv", [
    ["run"],
    ["run", "-n", "5", "-C", "64"],
    ["oracle", "-n", "4", "-C", "8", "--replay", "/nonexistent/schedule"],
    ["verify", "family-lemmas", "--trace", "x.jsonl"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "aslide:" in capsys.readouterr().err


def test_bad_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 2


def test_malformed_schedule_exits_2(tmp_path, capsys):
    sched = tmp_path / "s.txt"
    sched.write_text("1 0 1\n2 2 2\n")
    assert main(["oracle", "-n", "4", "-C", "8", "--replay", str(sched)]) == 2
    assert "self-loop" in capsys.readouterr().err
