import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from mhqg.cli import main, read_jsonl
from mhqg.graph_engine import GraphKind

ALL_GRAPH_FLAGS = [arg for kind in GraphKind for arg in ("--graph", kind.value)]


@pytest.fixture()
def runner():
    return CliRunner()


def _generate(runner, tables_path, pairs_path, out, extra=()):
    return runner.invoke(
        main,
        [
            "generate",
            "--corpus", str(tables_path),
            "--pairs", str(pairs_path),
            *ALL_GRAPH_FLAGS,
            "--backend", "stub",
            "--seed", "7",
            "--out", str(out),
            *extra,
        ],
    )


def test_generate_writes_parseable_records(runner, tables_path, pairs_path, tmp_path):
    out = tmp_path / "data.jsonl"
    result = _generate(runner, tables_path, pairs_path, out)
    assert result.exit_code == 0, result.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines
    for line in lines:
        record = json.loads(line)
        assert set(record) == {
            "id", "question", "answer", "kind", "sources", "perplexity", "provenance"
        }
        assert record["perplexity"] is None
        assert record["question"].endswith("?")
    # records parse back into candidates that satisfy their invariants
    candidates = read_jsonl(out)
    assert len(candidates) == len(lines)


def test_generate_requires_graph_flag(runner, tables_path, tmp_path):
    result = runner.invoke(
        main,
        ["generate", "--corpus", str(tables_path), "--out", str(tmp_path / "o.jsonl")],
    )
    assert result.exit_code == 2


def test_generate_unreadable_corpus_exits_3(runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "generate", "--corpus", str(tmp_path / "missing.json"),
            "--graph", "table_only", "--out", str(tmp_path / "o.jsonl"),
        ],
    )
    assert result.exit_code == 3


def test_generate_backend_outage_exits_4(runner, tables_path, tmp_path):
    result = runner.invoke(
        main,
        [
            "generate", "--corpus", str(tables_path),
            "--graph", "table_only",
            "--backend", "remote", "--backend-url", "http://127.0.0.1:9",
            "--out", str(tmp_path / "o.jsonl"),
        ],
    )
    assert result.exit_code == 4


def test_filter_top_n(runner, tables_path, pairs_path, tmp_path):
    raw = tmp_path / "raw.jsonl"
    _generate(runner, tables_path, pairs_path, raw)
    out = tmp_path / "filtered.jsonl"
    result = runner.invoke(
        main, ["filter", "--in", str(raw), "--out", str(out), "--top-n", "5"]
    )
    assert result.exit_code == 0, result.output
    kept = read_jsonl(out)
    assert len(kept) == 5
    scores = [c.perplexity for c in kept]
    assert scores == sorted(scores)
    report = json.loads((tmp_path / "filtered.jsonl.report.json").read_text())
    assert report["output_count"] == 5


def test_filter_top_n_zero_writes_empty_file_and_report(runner, tables_path, pairs_path, tmp_path):
    raw = tmp_path / "raw.jsonl"
    _generate(runner, tables_path, pairs_path, raw)
    out = tmp_path / "filtered.jsonl"
    result = runner.invoke(
        main, ["filter", "--in", str(raw), "--out", str(out), "--top-n", "0"]
    )
    assert result.exit_code == 0
    assert out.read_text() == ""
    assert (tmp_path / "filtered.jsonl.report.json").exists()


def test_filter_drops_degenerate_question(runner, tables_path, pairs_path, tmp_path):
    raw = tmp_path / "raw.jsonl"
    _generate(runner, tables_path, pairs_path, raw)
    planted = {
        "id": "deadbeef00000000",
        "question": "Who publishes the the the that publishes Doctor Minerva comics?",
        "answer": "Doctor Minerva",
        "kind": "text_only",
        "sources": ["planted"],
        "perplexity": None,
        "provenance": [],
    }
    lines = raw.read_text().splitlines()
    lines.insert(0, json.dumps(planted))
    raw.write_text("\n".join(lines) + "\n")
    out = tmp_path / "filtered.jsonl"
    half = (len(lines)) // 2
    result = runner.invoke(
        main,
        ["filter", "--in", str(raw), "--out", str(out), "--top-n", str(half), "--seed", "0"],
    )
    assert result.exit_code == 0
    assert "the the the" not in out.read_text()


def test_filter_missing_input_exits_3(runner, tmp_path):
    result = runner.invoke(
        main,
        ["filter", "--in", str(tmp_path / "no.jsonl"), "--out",
         str(tmp_path / "o.jsonl"), "--top-n", "1"],
    )
    assert result.exit_code == 3


def test_stats_outputs_expected_json(runner, tables_path, pairs_path, tmp_path):
    raw = tmp_path / "raw.jsonl"
    _generate(runner, tables_path, pairs_path, raw)
    stats_path = tmp_path / "stats.json"
    result = runner.invoke(main, ["stats", "--in", str(raw), "--out", str(stats_path)])
    assert result.exit_code == 0, result.output
    payload = json.loads(stats_path.read_text())
    assert payload["total"] == len(read_jsonl(raw))
    assert set(payload["by_kind"]) == {k.value for k in GraphKind}
    assert abs(sum(payload["by_wh"].values()) - 1.0) < 1e-9


def test_stats_empty_file(runner, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    result = runner.invoke(main, ["stats", "--in", str(empty)])
    assert result.exit_code == 0
    assert '"total": 0' in result.output


def test_export_graphs_six_files(runner, tmp_path):
    target = tmp_path / "graphs"
    result = runner.invoke(main, ["export-graphs", "--dir", str(target)])
    assert result.exit_code == 0
    names = sorted(p.name for p in target.iterdir())
    assert names == sorted(f"{k.value}.json" for k in GraphKind)
    for p in target.iterdir():
        obj = json.loads(p.read_text())
        assert {"name", "nodes", "edges"} <= set(obj)


def test_qdmr_baseline_outputs(runner, tables_path, tmp_path):
    out = tmp_path / "qdmr.jsonl"
    result = runner.invoke(
        main, ["qdmr-baseline", "--corpus", str(tables_path), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert any(row["steps"][0] == "Return Driver" for row in rows)
    assert all(row["question"].endswith("?") for row in rows)


def test_ingest_check(runner, tables_path, pairs_path):
    result = runner.invoke(
        main, ["ingest-check", "--corpus", str(tables_path), "--pairs", str(pairs_path)]
    )
    assert result.exit_code == 0
    assert "table contexts: 2" in result.output
    assert "passage pairs:  3" in result.output


def test_ingest_check_without_inputs_exits_2(runner):
    assert runner.invoke(main, ["ingest-check"]).exit_code == 2
