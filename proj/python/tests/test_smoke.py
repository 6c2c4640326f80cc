import json
import os
import pathlib

import pytest

import rationale_kg as rk

DATA = pathlib.Path(os.environ.get("RATIONALE_TEST_DATA", pathlib.Path(__file__).parents[2] / "tests" / "data"))


def triple(sid, decision, rationale):
    return {"sentence_id": sid, "decision": decision, "rationale": rationale}


def test_text_helpers():
    assert rk.split_sentences("Add a helper. It is used twice.") == ["Add a helper.", "It is used twice."]
    assert rk.similarity("add the lock", "add the lock") == 1.0
    assert rk.similarity("", "x") == 0.0
    assert rk.contradiction("Add the helper", "Remove the helper") == 0.95
    assert rk.extract("Drop the check because it is dead code") == ("Drop the check", "because it is dead code")
    assert rk.extract("Thanks") == (None, None)
    assert rk.classify(["Remove the lock because it deadlocks", "Thanks."]) == [(True, True), (False, False)]
    assert rk.is_missing_entity(" None ")
    assert rk.pair_count(527) == 138601


def test_agreement():
    assert rk.fleiss_kappa([[3, 0], [0, 3], [2, 1], [1, 2]]) == pytest.approx(1 / 3, abs=1e-9)
    rater = [True] * 91
    third = [False] * 19 + [True] * 72
    assert rk.unanimous_agreement([rater, rater, third]) == pytest.approx(72 / 91)
    with pytest.raises(rk.RationaleError):
        rk.fleiss_kappa([[1, 0], [0, 1]])


def test_graph_round_trip_and_findings():
    triples = [
        triple("a#0", "Remove the lock in oom_reaper", "because we lock the page"),
        triple("b#0", "Remove the lock in oom_reaper", "because we unlock the page"),
        triple("c#0", "Add the helper", "since the callers need it"),
        triple("d#0", "Remove the helper", "since the callers need it"),
    ]
    g = rk.Graph(triples)
    assert len(g) == 4
    kinds = sorted(e["kind"] for e in g.edges)
    assert kinds == ["Contradicts", "Similar"]
    m1 = g.detect_m1()
    assert [(f["d1"], f["d2"]) for f in m1] == [("D:a#0", "D:b#0")]
    m2 = g.detect_m2()
    assert [(f["d1"], f["d2"], f["rr_score"]) for f in m2] == [("D:c#0", "D:d#0", 1.0)]

    again = rk.Graph.from_json(g.to_json())
    assert again.to_json() == g.to_json()
    assert json.loads(g.to_json())["schema_version"] == 1
    assert g.to_dot().startswith("digraph {")

    incremental = rk.Graph([])
    for t in triples:
        incremental.add_decision(t)
    assert incremental.same_content(g)

    conflicts = g.check_conflicts(triple("n#0", "Add the helper", "r"))
    assert any(c["via"] == "D:c#0" and c["conflicting"] == "D:d#0" for c in conflicts)
    with pytest.raises(rk.RationaleError):
        g.add_decision(triples[0])
    with pytest.raises(rk.RationaleError):
        rk.Graph(triples, dd_similar=0.0)


def test_cli(tmp_path):
    code, out, _ = rk.run_cli(["--help"])
    assert code == 0 and "ingest" in out
    code, _, _ = rk.run_cli(["nope"])
    assert code == 2
    reports = str(tmp_path)
    steps = [
        ["--reports", reports, "ingest", "--input", str(DATA / "golden" / "commits.jsonl")],
        ["--reports", reports, "label"],
        ["--reports", reports, "extract"],
        ["--reports", reports, "build-graph"],
        ["--reports", reports, "score"],
        ["--reports", reports, "analyze", "--mechanism", "both"],
    ]
    for args in steps:
        code, _, err = rk.run_cli(args)
        assert code == 0, err
    findings = json.loads((tmp_path / "findings-both.json").read_text())["findings"]
    assert {f["mechanism"] for f in findings} == {"M1", "M2"}
    assert len(rk.Graph.load(tmp_path / "graph.json")) == 29
