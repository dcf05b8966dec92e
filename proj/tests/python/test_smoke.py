"""Smoke tests for the tgcore extension module."""

import json

import pytest

import tgcore

CATALOG = json.dumps(
    {
        "types": [
            {"id": "u64", "kind": "base", "name": "u64", "size": 8},
            {"id": "char", "kind": "base", "name": "char", "size": 1},
            {"id": "char_ptr", "kind": "pointer", "name": "char_ptr", "size": 8, "pointee": "char"},
            {
                "id": "list",
                "kind": "struct",
                "name": "list",
                "size": 24,
                "members": [
                    {"name": "next", "offset": 0, "type": "list_ptr"},
                    {"name": "prev", "offset": 8, "type": "list_ptr"},
                    {"name": "v", "offset": 16, "type": "u64"},
                ],
            },
            {"id": "list_ptr", "kind": "pointer", "name": "list_ptr", "size": 8, "pointee": "list"},
        ]
    }
)

SPEC = json.dumps(
    {
        "seed": 11,
        "gp_caches": [16, 24, 32, 48],
        "script": [
            {"op": "static", "name": "h", "symbol": "list_head", "type": "list_ptr"},
            {"op": "alloc", "name": "a", "type": "list"},
            {"op": "alloc", "name": "b", "type": "list"},
            {"op": "alloc", "name": "c", "type": "list"},
            {"op": "link", "src": "h", "dst": "a"},
            {"op": "link", "src": "a", "path": "next", "dst": "b"},
            {"op": "link", "src": "b", "path": "next", "dst": "c"},
        ],
    }
)


@pytest.fixture(scope="module")
def generated():
    dump, truth, table = tgcore.generate(SPEC, CATALOG)
    return dump, truth, table


@pytest.fixture(scope="module")
def analysis(generated):
    dump, _truth, table = generated
    a = tgcore.Analysis(CATALOG, dump, table)
    a.run()
    return a


def test_run_produces_pass_stats(analysis):
    stats = analysis.stats()
    assert [s.label for s in stats] == ["initial", "1", "2", "3", "4", "5", "6"]
    final = stats[-1]
    assert final.nodes == 4  # three heap objects and one static
    assert final.known_or_conjectured == 4
    assert final.conflicts == 0


def test_whattype_renders_conjectures(generated, analysis):
    _dump, truth, _table = generated
    bases = [o["base"] for o in json.loads(truth)["objects"]]
    for base in bases:
        line = analysis.whattype(int(base, 16))
        assert "possibly struct list" in line


def test_whattype_outside_any_object(analysis):
    assert "not contained" in analysis.whattype(0x10)


def test_evaluate_against_truth(generated, analysis):
    _dump, truth, _table = generated
    report = analysis.evaluate(truth)
    assert report.nodes == 3
    assert report.correct == 3
    assert report.misidentified == 0
    assert report.recognition_rate == 1.0
    assert "misidentification rate" in report.render()


def test_analyzers_render(analysis):
    assert analysis.findlocks() == ""  # no locks in this corpus
    assert "ADDR" in analysis.findfalse(64)
    assert analysis.conflict_count() == 0


def test_greatest_reach_and_istype(generated):
    dump, _truth, table = generated
    a = tgcore.Analysis(CATALOG, dump, table)
    a.run()
    addr, reach = a.greatest_reach()
    assert reach == 0  # everything is identified
    assert addr  # still reports some node

    stats = a.istype(int(addr, 16), "struct list")
    assert stats[-1].known_or_conjectured == 4


def test_render_stats_matches_grammar(analysis):
    text = tgcore.render_stats(analysis.stats())
    assert "typegraph:" in text
    assert "pass => initial" in text
    assert "known or conjectured" in text


def test_errors_surface_as_exceptions():
    with pytest.raises(tgcore.TgError):
        tgcore.Analysis("{not json", "{}", "")
