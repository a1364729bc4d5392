from __future__ import annotations

import json

import pytest

from doc2table.data import (
    InputFormatError,
    atomic_write_text,
    read_documents,
    read_review,
    read_triples,
    write_json,
    write_jsonl,
)
from doc2table.html_io import serialize_html

from conftest import make_flat_table


class TestAtomicWrites:
    def test_write_and_no_temp_leftovers(self, tmp_path):
        path = tmp_path / "sub" / "out.txt"
        atomic_write_text(path, "hello\n")
        assert path.read_text() == "hello\n"
        leftovers = [p for p in path.parent.iterdir() if p.name != "out.txt"]
        assert leftovers == []

    def test_write_json_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_json(a, {"z": 1, "a": [1.5, 2]})
        write_json(b, {"a": [1.5, 2], "z": 1})
        assert a.read_bytes() == b.read_bytes()

    def test_write_jsonl_single_lines(self, tmp_path):
        path = tmp_path / "rows.jsonl"
        write_jsonl(path, [{"b": 1, "a": 2}, {"x": "y"}])
        lines = path.read_text().splitlines()
        assert lines == ['{"a":2,"b":1}', '{"x":"y"}']


class TestDocuments:
    def test_sentences_form(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text(json.dumps({"doc_id": "d", "sentences": ["One.", "Two."]}) + "\n")
        docs = read_documents(path)
        assert [s.raw for s in docs["d"].sentences] == ["One.", "Two."]

    def test_raw_text_is_segmented(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text(json.dumps({"doc_id": "d", "text": "First one. Second one."}) + "\n")
        docs = read_documents(path)
        assert [s.raw for s in docs["d"].sentences] == ["First one.", "Second one."]

    def test_duplicate_doc_id_rejected(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        row = json.dumps({"doc_id": "d", "sentences": ["x"]})
        path.write_text(row + "\n" + row + "\n")
        with pytest.raises(InputFormatError) as excinfo:
            read_documents(path)
        assert excinfo.value.line == 2
        assert excinfo.value.field == "doc_id"

    def test_missing_field_names_file_line_field(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text(json.dumps({"doc_id": "d"}) + "\n")
        with pytest.raises(InputFormatError) as excinfo:
            read_documents(path)
        assert excinfo.value.field == "sentences"
        assert str(path) in str(excinfo.value)
        report = excinfo.value.to_dict()
        assert report["line"] == 1 and report["type"] == "input_format"

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text("{not json}\n")
        with pytest.raises(InputFormatError) as excinfo:
            read_documents(path)
        assert excinfo.value.line == 1


class TestTriples:
    def test_round_trip(self, tmp_path):
        table = make_flat_table(2, 2)
        path = tmp_path / "triples.jsonl"
        write_jsonl(
            path,
            [
                {
                    "id": "t1",
                    "doc_id": "d",
                    "question": "Q?",
                    "table_html": serialize_html(table),
                    "relevant_sentence_ids": [0, 3],
                }
            ],
        )
        triples = read_triples(path)
        assert triples[0].triple_id == "t1"
        assert triples[0].table == table
        assert triples[0].relevant_sentence_ids == (0, 3)

    def test_bad_table_html_names_field(self, tmp_path):
        path = tmp_path / "triples.jsonl"
        write_jsonl(
            path,
            [{"id": "t", "doc_id": "d", "question": "q", "table_html": "<p>no table</p>"}],
        )
        with pytest.raises(InputFormatError) as excinfo:
            read_triples(path)
        assert excinfo.value.field == "table_html"

    def test_non_string_id_rejected(self, tmp_path):
        path = tmp_path / "triples.jsonl"
        write_jsonl(path, [{"id": 7, "doc_id": "d", "question": "q", "table_html": "x"}])
        with pytest.raises(InputFormatError) as excinfo:
            read_triples(path)
        assert excinfo.value.field == "id"


class TestReview:
    def test_decisions_grouped_by_table(self, tmp_path):
        path = tmp_path / "review.jsonl"
        write_jsonl(
            path,
            [
                {"table_id": "t1", "match_id": "0,0", "status": "confirmed"},
                {"table_id": "t1", "match_id": "0,1", "status": "rejected"},
                {"table_id": "t2", "match_id": "1,1", "status": "rejected"},
            ],
        )
        decisions = read_review(path)
        assert decisions == {
            "t1": {"0,0": "confirmed", "0,1": "rejected"},
            "t2": {"1,1": "rejected"},
        }

    def test_unknown_status_rejected(self, tmp_path):
        path = tmp_path / "review.jsonl"
        write_jsonl(path, [{"table_id": "t", "match_id": "0,0", "status": "maybe"}])
        with pytest.raises(InputFormatError) as excinfo:
            read_review(path)
        assert excinfo.value.field == "status"
