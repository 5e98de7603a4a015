import json
import random

import pytest

from mhqg.corpus import (
    Cell,
    LinkedTableContext,
    Passage,
    PassagePair,
    Table,
    flatten_table_row,
    load_table_corpus,
    load_text_pair_corpus,
    passage_pair_to_obj,
    split_sentences,
    table_context_to_obj,
)
from mhqg.errors import DanglingLink, DuplicatePair, IndexOutOfRange, MalformedInput


def test_load_table_corpus_fixture(tables_path):
    contexts = load_table_corpus(tables_path)
    assert len(contexts) == 2
    first = contexts[0]
    assert first.table.title == "2004 United States Grand Prix"
    assert first.table.headers == ("Pos", "Driver")
    # every link resolves
    for row in first.table.rows:
        for cell in row:
            for pid in cell.linked_passage_ids:
                assert pid in first.passages


def test_load_table_corpus_empty(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("[]", encoding="utf-8")
    assert load_table_corpus(path) == []


def test_load_table_corpus_dangling_link(tmp_path):
    obj = [
        {
            "table": {
                "id": "t",
                "title": "T",
                "section_title": "",
                "headers": ["A"],
                "rows": [[{"raw": "x", "links": ["p99"]}]],
            },
            "passages": {},
        }
    ]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj), encoding="utf-8")
    with pytest.raises(DanglingLink) as err:
        load_table_corpus(path)
    assert "p99" in str(err.value)


def test_load_table_corpus_schema_violation_reports_record(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([{"table": {"id": "t"}}]), encoding="utf-8")
    with pytest.raises(MalformedInput) as err:
        load_table_corpus(path)
    assert err.value.record_index == 0


def test_load_pairs_fixture(pairs_path):
    pairs = load_text_pair_corpus(pairs_path)
    assert len(pairs) == 3
    assert pairs[0].first.title == "Arthur Lubin"
    assert pairs[0].second.title == "Ciro Ippolito"


def test_load_pairs_empty(tmp_path):
    path = tmp_path / "pairs.json"
    path.write_text("[]", encoding="utf-8")
    assert load_text_pair_corpus(path) == []


def test_load_pairs_duplicate_id(tmp_path):
    entry = {"id": "p1", "title": "T", "text": "Text here."}
    path = tmp_path / "pairs.json"
    path.write_text(json.dumps([{"first": entry, "second": entry}]), encoding="utf-8")
    with pytest.raises(DuplicatePair):
        load_text_pair_corpus(path)


def test_round_trip_table_corpus(tmp_path, table_contexts):
    path = tmp_path / "dump.json"
    path.write_text(
        json.dumps([table_context_to_obj(c) for c in table_contexts]), encoding="utf-8"
    )
    assert load_table_corpus(path) == table_contexts


def test_round_trip_pairs(tmp_path, passage_pairs):
    path = tmp_path / "dump.json"
    path.write_text(
        json.dumps([passage_pair_to_obj(p) for p in passage_pairs]), encoding="utf-8"
    )
    assert load_text_pair_corpus(path) == passage_pairs


def test_loading_is_idempotent(tables_path):
    assert load_table_corpus(tables_path) == load_table_corpus(tables_path)


# -- flatten_table_row -------------------------------------------------------


def _grand_prix_table() -> Table:
    return Table(
        id="t",
        title="2004 United States Grand Prix",
        section_title="",
        headers=("Pos", "Driver"),
        rows=((Cell("4"), Cell("Jenson Button")),),
    )


def test_flatten_row_template():
    assert (
        flatten_table_row(_grand_prix_table(), 0)
        == "2004 United States Grand Prix ;  ; Pos is 4 ; Driver is Jenson Button ."
    )


def test_flatten_row_skips_empty_cells():
    table = Table(
        id="t", title="Title", section_title="Sect", headers=("A", "B"),
        rows=((Cell(""), Cell("")),),
    )
    assert flatten_table_row(table, 0) == "Title ; Sect ."


def test_flatten_row_out_of_range():
    with pytest.raises(IndexOutOfRange):
        flatten_table_row(_grand_prix_table(), 1)


def test_flatten_row_mentions_each_cell_once_and_only_this_row():
    rng = random.Random(11)
    for _ in range(50):
        n_cols = rng.randint(1, 4)
        n_rows = rng.randint(1, 4)
        headers = tuple(f"H{i}" for i in range(n_cols))
        values = iter(f"val{k}q" for k in range(100))  # "q" suffix keeps values prefix-free
        rows = tuple(
            tuple(Cell(next(values)) for _ in range(n_cols)) for _ in range(n_rows)
        )
        table = Table(id="t", title="Ttl", section_title="", headers=headers, rows=rows)
        r = rng.randrange(n_rows)
        flat = flatten_table_row(table, r)
        for c, cell in enumerate(table.rows[r]):
            assert flat.count(f"{headers[c]} is {cell.raw}") == 1
        for other in range(n_rows):
            if other == r:
                continue
            for c, cell in enumerate(table.rows[other]):
                assert f"{headers[c]} is {cell.raw}" not in flat


# -- sentence splitting --------------------------------------------------------


def test_sentence_spans_cover_and_order():
    text = "Dr. Smith arrived. He sat down. Then he left!"
    spans = split_sentences(text)
    assert [text[a:b] for a, b in spans] == [
        "Dr. Smith arrived.",
        "He sat down.",
        "Then he left!",
    ]
    prev = 0
    for a, b in spans:
        assert prev <= a <= b <= len(text)
        prev = b


def test_invariants_rejected():
    with pytest.raises(ValueError):
        Passage(id="p", title="", text="x", sentences=())
    with pytest.raises(ValueError):
        Table(id="t", title="T", section_title="", headers=("A", "a"), rows=())
    with pytest.raises(ValueError):
        Table(id="t", title="T", section_title="", headers=("A",), rows=((Cell("1"), Cell("2")),))
    with pytest.raises(DuplicatePair):
        p = Passage.build("x", "T", "Body text.")
        PassagePair(first=p, second=p)
