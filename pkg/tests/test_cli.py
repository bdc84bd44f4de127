import json

import pytest

from submatch import cli
from submatch.graph import load_csr
from submatch.metrics import CSV_FIELDS, parse_csv
from submatch.oracle import brute_force
from submatch.query import corpus_query
from submatch.service.app import create_app

K4 = "0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n"


@pytest.fixture
def k4(tmp_path):
    edges = tmp_path / "k4.txt"
    edges.write_text(K4)
    out = tmp_path / "k4.csr"
    assert cli.main(["ingest", str(edges), str(out)]) == 0
    return out


@pytest.fixture
def example_csr(tmp_path):
    from conftest import EXAMPLE_EDGES

    edges = tmp_path / "ex.txt"
    edges.write_text("".join(f"{a} {b}\n" for a, b in EXAMPLE_EDGES))
    out = tmp_path / "ex.csr"
    assert cli.main(["ingest", str(edges), str(out)]) == 0
    return out


def _csv(capsys):
    return parse_csv(capsys.readouterr().out)


def test_ingest_triangle(tmp_path, capsys):
    edges = tmp_path / "tri.txt"
    edges.write_text("# a triangle\n0 1\n1 2\n2 0\n")
    assert cli.main(["ingest", str(edges), str(tmp_path / "tri.csr")]) == 0
    assert "N=3 M=3 labels=no" in capsys.readouterr().out


def test_reingest_is_byte_identical(k4, tmp_path):
    again = tmp_path / "again.csr"
    assert cli.main(["ingest", str(k4), str(again)]) == 0
    assert again.read_bytes() == k4.read_bytes()


def test_ingest_with_labels(tmp_path, capsys):
    edges = tmp_path / "e.txt"
    edges.write_text("0 1\n1 2\n")
    labels = tmp_path / "l.txt"
    labels.write_text("0 5\n1 6\n2 5\n")
    assert cli.main(["ingest", str(edges), str(tmp_path / "g.csr"), "--labels", str(labels)]) == 0
    assert "labels=yes" in capsys.readouterr().out
    assert cli.main(["stats", str(tmp_path / "g.csr")]) == 0
    out = capsys.readouterr().out
    assert "label 5: 2" in out and "label 6: 1" in out


def test_ingest_bad_input(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 x\n")
    assert cli.main(["ingest", str(bad), str(tmp_path / "o.csr")]) == cli.EXIT_USAGE
    assert cli.main(["ingest", str(tmp_path / "missing.txt"), str(tmp_path / "o.csr")]) == cli.EXIT_USAGE


def test_stats(k4, capsys):
    assert cli.main(["stats", str(k4)]) == 0
    assert "N=4 M=6 avg_degree=3.000 max_degree=3" in capsys.readouterr().out


def test_run_fullrep_triangle_on_k4(k4, capsys):
    assert cli.main(["run", str(k4), "triangle", "--strategy", "fullrep", "--workers", "2"]) == 0
    rows = _csv(capsys)
    assert len(rows) == 1 and rows[0]["result_count"] == 4


def test_csv_schema(k4, capsys):
    cli.main(["run", str(k4), "clique4", "--workers", "2"])
    text = capsys.readouterr().out
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)
    row = parse_csv(text)[0]
    assert isinstance(row["T"], float) and isinstance(row["peak_mem"], int)
    assert row["result_count"] == 1


def test_woptjoin_and_binjoin_agree(example_csr, capsys):
    counts = []
    for strategy in ("woptjoin", "binjoin"):
        assert cli.main(["run", str(example_csr), "diamond", "--strategy", strategy, "--workers", "3",
                         "--batching", "--batch-size", "2", "--compression"]) == 0
        counts.append(_csv(capsys)[0]["result_count"])
    assert counts == [3, 3]


def test_run_partition_modes(example_csr, capsys):
    for mode in ("tri", "tri-ordered"):
        assert cli.main(["run", str(example_csr), "diamond", "--partition", mode, "--workers", "2"]) == 0
        row = _csv(capsys)[0]
        assert row["result_count"] == 3 and row["opts"] == "trindexing"


def test_run_writes_outputs(example_csr, tmp_path, capsys):
    matches = tmp_path / "m.txt"
    table = tmp_path / "metrics.csv"
    for _ in range(2):
        assert cli.main(["run", str(example_csr), "diamond", "--output", str(matches), "--csv", str(table)]) == 0
    capsys.readouterr()
    # ids are the degree-relabeled ones stored in the CSR file
    want = brute_force(corpus_query("diamond"), load_csr(example_csr)).matches
    assert matches.read_text().splitlines() == [" ".join(map(str, m)) for m in want]
    rows = parse_csv(table.read_text())
    assert len(rows) == 2


def test_time_limit_exit_code(tmp_path, capsys):
    from submatch.graph import random_graph, save_csr

    g = tmp_path / "big.csr"
    save_csr(random_graph(300, 0.2, seed=1), g)
    rc = cli.main(["run", str(g), "clique4", "--strategy", "binjoin", "--workers", "2", "--time-limit", "1ms"])
    assert rc == cli.EXIT_OT
    captured = capsys.readouterr()
    assert parse_csv(captured.out)[0]["T"] == "OT"


def test_mem_limit_exit_code(k4, capsys):
    assert cli.main(["run", str(k4), "triangle", "--mem-limit", "1K"]) == cli.EXIT_OOM
    assert parse_csv(capsys.readouterr().out)[0]["result_count"] == "OOM"


def test_missing_graph(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.csr"), "triangle"]) == cli.EXIT_USAGE


def test_unknown_query(k4):
    assert cli.main(["run", str(k4), "no-such-query"]) == cli.EXIT_USAGE


def test_query_file(k4, tmp_path, capsys):
    qf = tmp_path / "tri.q"
    qf.write_text("3\n0 1\n1 2\n0 2\n")
    assert cli.main(["run", str(k4), str(qf), "--workers", "1"]) == 0
    assert _csv(capsys)[0]["result_count"] == 4


def test_plan_text_and_json(example_csr, capsys):
    assert cli.main(["plan", str(example_csr), "diamond", "--strategy", "binjoin", "--trindexing"]) == 0
    assert "clique" in capsys.readouterr().out.lower()
    assert cli.main(["plan", str(example_csr), "diamond", "--strategy", "shrcube", "--workers", "8", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "shrcube"


@pytest.mark.parametrize("strategy", ["binjoin", "woptjoin", "shrcube", "fullrep"])
def test_plan_dump_and_replay(example_csr, tmp_path, capsys, strategy):
    dump = tmp_path / "plan.json"
    base = ["run", str(example_csr), "diamond", "--strategy", strategy, "--workers", "2"]
    assert cli.main(base + ["--plan-dump", str(dump)]) == 0
    capsys.readouterr()
    assert cli.main(base + ["--plan", str(dump)]) == 0
    assert _csv(capsys)[0]["result_count"] == 3


def test_plan_replay_kind_mismatch(example_csr, tmp_path):
    dump = tmp_path / "plan.json"
    assert cli.main(["run", str(example_csr), "diamond", "--strategy", "binjoin", "--plan-dump", str(dump)]) == 0
    assert cli.main(["run", str(example_csr), "diamond", "--strategy", "woptjoin", "--plan", str(dump)]) == cli.EXIT_USAGE


def test_partition_dump_and_run(example_csr, tmp_path, capsys):
    out = tmp_path / "parts"
    assert cli.main(["partition", str(example_csr), "--workers", "3", "--partition", "tri", "--output", str(out)]) == 0
    text = capsys.readouterr().out
    assert "mode=triangle workers=3" in text and text.count("wrote ") >= 3
    assert cli.main(["run", str(example_csr), "diamond", "--partitions", str(out), "--trindexing"]) == 0
    assert _csv(capsys)[0]["result_count"] == 3


def test_verify_zero_trials_is_empty_pass(capsys):
    assert cli.main(["verify", "--trials", "0"]) == 0
    assert "PASS: 0/0" in capsys.readouterr().out


def test_verify_small(capsys):
    rc = cli.main(["verify", "--n", "12", "--p", "0.3", "--query", "triangle", "--query", "square"])
    assert rc == 0
    assert capsys.readouterr().out.rstrip().endswith("runs agree with the oracle")


def test_verify_corrupted_plan_fails(capsys):
    rc = cli.main(["verify", "--n", "14", "--p", "0.4", "--query", "diamond", "--strategy", "woptjoin", "--corrupt-plan"])
    assert rc == cli.EXIT_FAIL
    out = capsys.readouterr().out
    assert "FAIL" in out and ("unexpected" in out or "missing" in out)


def test_duration_and_size_parsing():
    assert cli.parse_duration("1ms") == pytest.approx(1e-3)
    assert cli.parse_duration("5m") == 300
    assert cli.parse_duration("2") == 2
    assert cli.parse_size("2K") == 2048
    assert cli.parse_size("1G") == 1 << 30
    assert cli.parse_size("100") == 100


def test_default_flags():
    args = cli.build_parser().parse_args(["run", "g", "q"])
    assert args.batch_size == 1_000_000 and args.strategy == "woptjoin" and args.workers >= 1


def test_server_mode(example_csr, capsys, monkeypatch):
    from fastapi.testclient import TestClient

    client = TestClient(create_app())

    class FakeRemote(cli._Remote):
        def __init__(self, url):
            self.client = client

    monkeypatch.setattr(cli, "_Remote", FakeRemote)
    assert cli.main(["--server", "http://x", "run", str(example_csr), "diamond", "--workers", "2"]) == 0
    assert _csv(capsys)[0]["result_count"] == 3
    assert cli.main(["--server", "http://x", "stats", "/does/not/exist"]) == cli.EXIT_USAGE
