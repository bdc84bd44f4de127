from submatch.graph import random_graph
from submatch.metrics import CSV_FIELDS, OOM, OT, csv_text, failed_row, parse_csv
from submatch.query import corpus_query
from submatch.verify import corrupt_plan, seeded_graphs, verify


def test_csv_round_trip():
    row = {"query": "q", "strategy": "binjoin", "opts": "batching+compression", "T": 1.25, "T_comp": 1.0,
           "T_comm": 0.25, "max_recv_integers": 17, "peak_mem": 4096, "result_count": 3}
    text = csv_text([row])
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)
    assert parse_csv(text) == [row]


def test_failed_rows_keep_status():
    for status in (OT, OOM):
        back = parse_csv(csv_text([failed_row("q", "woptjoin", "none", status)]))[0]
        assert back["T"] == status and back["result_count"] == status and back["query"] == "q"


def test_csv_without_header():
    assert csv_text([failed_row("q", "s", "o", OT)], header=False).count("\n") == 1


def test_seeded_graphs_are_reproducible():
    a = seeded_graphs(2, 12, 0.3, 7)
    b = seeded_graphs(2, 12, 0.3, 7)
    assert [n for n, _ in a] == [n for n, _ in b]
    assert all((x.adjacency == y.adjacency).all() for (_, x), (_, y) in zip(a, b))


def test_verify_passes_on_small_graph():
    report = verify([("g", random_graph(12, 0.35, seed=3))], {"square": corpus_query("square")})
    assert report.ok and len(report.rows) == 8 + 8 + 1 + 1
    assert report.summary().endswith("PASS: 18/18 runs agree with the oracle")


def test_verify_empty_is_pass():
    report = verify([], None)
    assert report.ok and report.summary().endswith("PASS: 0/0 runs agree with the oracle")


def test_corrupted_plan_is_caught():
    report = verify([("g", random_graph(14, 0.4, seed=1))], {"diamond": corpus_query("diamond")},
                    strategies=("woptjoin",), corrupt=True)
    assert not report.ok and report.failures[0].diff


def test_corrupt_plan_leaves_other_plans():
    assert corrupt_plan((0, 1, 2)) == (0, 1, 2)
