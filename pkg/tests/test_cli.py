import json
from pathlib import Path

import pytest

from dbnepisode.cli import run
from dbnepisode.episodes import Episode, parse_dump
from dbnepisode.evaluation import sweep
from dbnepisode.events import parse_events
from dbnepisode.simulator import NetworkSpec

from oracles import all_episodes, distinct_count

EXAMPLE1 = "time,label\n2,A\n3,B\n3,D\n5,B\n9,C\n10,A\n12,D\n"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def ok(*argv):
    assert run(list(argv)) == 0, argv


def make_chain_run(seed="4", duration="5"):
    ok("topology", "chain", "--params", '{"n": 4, "delay": 2}', "--out", "spec.json")
    ok("simulate", "--spec", "spec.json", "--duration", duration, "--seed", seed,
       "--out", "spikes.csv", "--truth", "truth.json")


def test_help_lists_defaults(capsys):
    assert run(["--help"]) == 0
    out = capsys.readouterr().out
    assert "W=10" in out and "epsilon=0.0005" in out
    assert run(["learn", "--help"]) == 0
    out = capsys.readouterr().out
    for flag in ("--window", "--threshold", "--epsilon", "--max-parents", "--jobs", "--dot"):
        assert flag in out
    assert "default: 0.002" in out and "default: 10" in out


def test_usage_errors_exit_2(workdir, capsys):
    assert run(["learn", "--bogus"]) == 2
    assert run(["learn"]) == 2
    assert run(["learn", "--in", "missing.csv"]) == 2
    assert "no such file" in capsys.readouterr().err
    Path("s.csv").write_text(EXAMPLE1)
    assert run(["learn", "--in", "s.csv", "--window", "0"]) == 2
    assert run(["mine", "--in", "s.csv", "--jobs", "0"]) == 2
    assert run(["surrogate", "--in", "s.csv", "--n", "0", "--out-dir", "d"]) == 2
    assert run(["sweep", "--spec", "x.json", "--thetas", "a,b"]) == 2


def test_bad_input_exits_1(workdir, capsys):
    Path("bad.csv").write_text("time,label\nfoo,A\n")
    assert run(["mine", "--in", "bad.csv"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_learn_writes_json_and_dot(workdir):
    make_chain_run(duration="30")
    ok("learn", "--in", "spikes.csv", "--window", "10", "--threshold", "0.002", "--epsilon", "0.0005",
       "--out", "net.json", "--dot", "net.dot")
    net = json.loads(Path("net.json").read_text())
    assert net["config"]["W"] == 10 and net["config"]["epsilon"] == 0.0005
    assert {(e["from"], e["to"], e["delay"]) for e in net["edges"]} == {("N0", "N1", 2), ("N1", "N2", 2), ("N2", "N3", 2)}
    assert Path("net.dot").read_text().count("->") == 3
    ok("eval", "--learned", "net.json", "--truth", "truth.json", "--out", "score.json")
    score = json.loads(Path("score.json").read_text())
    assert score["precision"] == 100.0 and score["recall"] == 100.0
    assert "time_total_s" not in score


def canonical_frequent(stream, W, theta, k):
    out = {}
    for size in range(1, k + 2):
        for types, delays in all_episodes(stream.M, size, W):
            if any(d == 0 and a >= b for a, b, d in zip(types, types[1:], delays)):
                continue
            c = distinct_count(stream.events, types, delays, W, stream.T)
            if c > theta * (stream.T - W):
                out[Episode(types, delays)] = c
    return out


def test_mine_example1_lists_all_short_episodes(workdir):
    # shifted by W so that every event lies past the first window
    shifted = "time,label\n" + "".join(
        f"{int(t) + 12},{a}\n" for t, a in (line.split(",") for line in EXAMPLE1.splitlines()[1:]))
    Path("ex1.csv").write_text(shifted)
    ok("mine", "--in", "ex1.csv", "--threshold", "0", "--window", "12", "--max-parents", "1", "--out", "dump.tsv")
    text = Path("dump.tsv").read_text()
    assert text.startswith("# config: ")
    s = parse_events(shifted)
    rows = parse_dump(text, s.alphabet)
    assert {e: c for e, c, _ in rows} == canonical_frequent(s, 12, 0.0, 1)
    assert all(e.span <= 12 for e, _, _ in rows)


def test_surrogates_learn_to_roots(workdir):
    ok("topology", "random", "--params", '{"n": 125, "density": 0.4, "seed": 0}', "--out", "spec.json")
    ok("simulate", "--spec", "spec.json", "--duration", "60", "--seed", "1", "--out", "spikes.csv")
    ok("surrogate", "--in", "spikes.csv", "--n", "25", "--seed", "7", "--out-dir", "sur")
    files = sorted(Path("sur").glob("surrogate_*.csv"))
    assert len(files) == 25
    assert json.loads(Path("sur/config.json").read_text())["seed"] == 7
    original = parse_events(Path("spikes.csv").read_text())
    for f in files:
        ok("learn", "--in", str(f), "--threshold", "0.0015", "--epsilon", "0.0005",
           "--alphabet", ",".join(original.alphabet.labels), "--out", "net.json")
        assert json.loads(Path("net.json").read_text())["edges"] == []


def test_pipeline_matches_sweep_cell(workdir):
    make_chain_run(seed="9")
    ok("learn", "--in", "spikes.csv", "--threshold", "0.014", "--epsilon", "0.001", "--window", "10",
       "--max-parents", "3", "--out", "net.json")
    ok("eval", "--learned", "net.json", "--truth", "truth.json", "--out", "score.json")
    score = json.loads(Path("score.json").read_text())
    spec = NetworkSpec.from_json_obj(json.loads(Path("spec.json").read_text()))
    cell = sweep(spec, 5.0, [0.014], [0.001], seed=9, W=10, k=3).cells[0]
    got = cell.report.to_json_obj()
    assert {k: score[k] for k in got} == got


def test_sweep_subcommand(workdir):
    make_chain_run()
    ok("sweep", "--spec", "spec.json", "--duration", "3", "--thetas", "0.002,0.014", "--epsilons", "0.001",
       "--out", "grid.csv")
    lines = Path("grid.csv").read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert lines[1] == "theta,epsilon,precision,recall,time_mine_s,time_search_s"
    assert len(lines) == 4


def run_all(jobs):
    make_chain_run(seed="3")
    ok("mine", "--in", "spikes.csv", "--jobs", jobs, "--out", "dump.tsv")
    ok("learn", "--in", "spikes.csv", "--jobs", jobs, "--out", "net.json", "--dot", "net.dot")
    ok("eval", "--learned", "net.json", "--truth", "truth.json", "--out", "score.json")
    ok("surrogate", "--in", "spikes.csv", "--n", "3", "--seed", "3", "--out-dir", "sur")
    ok("sweep", "--spec", "spec.json", "--duration", "2", "--thetas", "0.002,0.008", "--epsilons", "0.001",
       "--jobs", jobs, "--out", "grid.csv")
    return {p.relative_to(Path.cwd()).as_posix(): p.read_bytes() for p in sorted(Path.cwd().rglob("*")) if p.is_file()}


def test_outputs_byte_identical(tmp_path, monkeypatch):
    results = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "8")):
        d = tmp_path / name
        d.mkdir()
        monkeypatch.chdir(d)
        results.append(run_all(jobs))
    assert len(results[0]) >= 11
    assert results[0] == results[1] == results[2]
