from __future__ import annotations

import logging
import random

import pytest
from hypothesis import given, settings

from doc2table.html_io import (
    GridCell,
    TableInputError,
    TableStructureError,
    parse_grid,
    parse_html_table,
    serialize_html,
    serialize_markdown,
)
from doc2table.model import CoordTree, HierarchicalTable, flatten_to_kv, leaf_coords

import strategies as sts

MINIMAL = "<table><tr><th></th><th>c</th></tr><tr><th>r</th><td>v</td></tr></table>"


class TestParseMinimal:
    def test_minimal_table(self):
        table = parse_html_table(MINIMAL)
        assert table.stub_header == ""
        assert table.left.to_nested() == ["r"]
        assert table.top.to_nested() == ["c"]
        assert table.body == (("v",),)

    def test_parse_is_deterministic(self):
        assert parse_html_table(MINIMAL) == parse_html_table(MINIMAL)

    def test_fallback_without_header_markup(self):
        html = "<table><tr><td>h0</td><td>h1</td></tr><tr><td>r</td><td>v</td></tr></table>"
        table = parse_html_table(html)
        assert table.stub_header == "h0"
        assert table.top.to_nested() == ["h1"]
        assert table.left.to_nested() == ["r"]
        assert table.body == (("v",),)

    def test_entities_decoded_and_whitespace_normalized(self):
        html = (
            "<table><tr><th></th><th>A &amp; B</th></tr>"
            "<tr><th>r</th><td>61,&nbsp;276</td></tr></table>"
        )
        table = parse_html_table(html)
        assert table.top.to_nested() == ["A & B"]
        assert table.body == (("61, 276",),)

    def test_nested_markup_stripped_to_text(self):
        html = (
            "<table><tr><th></th><th><b>bold</b> head</th></tr>"
            "<tr><th>r</th><td><span>a</span><br>b</td></tr></table>"
        )
        table = parse_html_table(html)
        assert table.top.to_nested() == ["bold head"]
        assert table.body == (("a b",),)


class TestHierarchyFromSpans:
    def test_colspan_parent_over_two_subheaders(self):
        # Hand expansion: the 2-row header region gives column chains
        # [Sales, 2022], [Sales, 2023], [Total]; "Item" spans the stub.
        html = (
            "<table>"
            '<tr><th rowspan="2">Item</th><th colspan="2">Sales</th><th rowspan="2">Total</th></tr>'
            "<tr><th>2022</th><th>2023</th></tr>"
            "<tr><th>Widgets</th><td>10</td><td>20</td><td>30</td></tr>"
            "</table>"
        )
        table = parse_html_table(html)
        assert table.stub_header == "Item"
        assert table.top.to_nested() == [["Sales", ["2022", "2023"]], "Total"]
        assert table.left.to_nested() == ["Widgets"]
        assert table.body == (("10", "20", "30"),)

    def test_rowspan_parent_in_left_region(self, example_table_html, example_table):
        assert example_table.left.to_nested()[2] == [
            "Urinary tract",
            ["Kidney and renal pelvis", "Bladder"],
        ]

    def test_example_kv_triple(self, example_table):
        triples = flatten_to_kv(example_table)
        assert (
            ("Urinary tract", "Kidney and renal pelvis"),
            ("Mortality", "Females"),
            "61, 276",
        ) in [(t.left_key, t.top_key, t.value) for t in triples]

    def test_bottom_boundary_colspan_duplicates_leaf(self):
        html = (
            "<table><tr><th></th><th colspan=\"2\">Pair</th></tr>"
            "<tr><th>r</th><td>1</td><td>2</td></tr></table>"
        )
        table = parse_html_table(html)
        assert table.top.to_nested() == ["Pair", "Pair"]
        assert table.body == (("1", "2"),)


class TestParseErrors:
    def test_zero_tables(self):
        with pytest.raises(TableInputError):
            parse_html_table("<div>no table here</div>")

    def test_multiple_tables(self):
        with pytest.raises(TableInputError):
            parse_html_table(MINIMAL + MINIMAL)

    def test_non_rectangular_names_coordinates(self):
        html = "<table><tr><td>a</td><td>b</td></tr><tr><td>c</td></tr></table>"
        with pytest.raises(TableStructureError) as excinfo:
            parse_html_table(html)
        assert "row 1, column 1" in str(excinfo.value)

    def test_overlapping_spans(self):
        html = (
            "<table><tr><td>a</td><td rowspan=\"2\">b</td></tr>"
            "<tr><td colspan=\"2\">c</td></tr></table>"
        )
        with pytest.raises(TableStructureError) as excinfo:
            parse_html_table(html)
        assert "overlap" in str(excinfo.value)

    def test_header_only_table(self):
        with pytest.raises(TableStructureError):
            parse_html_table("<table><tr><th>a</th><th>b</th></tr></table>")

    def test_empty_header_label(self):
        html = "<table><tr><th></th><th></th></tr><tr><th>r</th><td>v</td></tr></table>"
        with pytest.raises(TableStructureError) as excinfo:
            parse_html_table(html)
        assert "empty header label" in str(excinfo.value)

    def test_indentation_warning(self, caplog):
        html = (
            "<table><tr><th></th><th>c</th></tr>"
            "<tr><th>Parent</th><td>1</td></tr>"
            "<tr><th>&nbsp;&nbsp;Child</th><td>2</td></tr></table>"
        )
        with caplog.at_level(logging.WARNING, logger="doc2table.html_io"):
            table = parse_html_table(html)
        assert any("indentation" in r.message for r in caplog.records)
        assert table.left.depth == 1  # parsed flat, not nested


class TestSpanConservation:
    def test_on_example_table(self, example_table_html):
        grid = parse_grid(example_table_html)
        covered = sum(c.row_span * c.col_span for c in grid.cells)
        assert covered == grid.n_rows * grid.n_cols

    def test_on_random_tables(self):
        rng = random.Random(5)
        for _ in range(50):
            html = serialize_html(sts.random_table(rng))
            grid = parse_grid(html)
            covered = sum(c.row_span * c.col_span for c in grid.cells)
            assert covered == grid.n_rows * grid.n_cols


class TestRoundTrip:
    def test_minimal(self):
        table = parse_html_table(MINIMAL)
        assert parse_html_table(serialize_html(table)) == table

    def test_example_preserves_kv(self, example_table):
        again = parse_html_table(serialize_html(example_table))
        assert again == example_table
        assert flatten_to_kv(again) == flatten_to_kv(example_table)

    def test_committed_html_is_canonical(self, example_table_html, example_table):
        assert serialize_html(example_table) + "\n" == example_table_html

    @given(table=sts.tables())
    @settings(max_examples=150, deadline=None)
    def test_property_round_trip(self, table):
        assert parse_html_table(serialize_html(table)) == table

    def test_escaping_round_trip(self):
        table = HierarchicalTable(
            "a<b>&\"quote\"",
            CoordTree.from_nested(["r & <d>"]),
            CoordTree.from_nested(["c>1"]),
            (("<script>'v'&amp;",),),
        )
        assert parse_html_table(serialize_html(table)) == table

    def test_leaf_order_stable_through_round_trip(self, example_table):
        again = parse_html_table(serialize_html(example_table))
        assert leaf_coords(again.left) == leaf_coords(example_table.left)
        assert leaf_coords(again.top) == leaf_coords(example_table.top)


class TestMarkdown:
    def test_flat_table(self, flat_2x2):
        md = serialize_markdown(flat_2x2)
        assert md.splitlines() == [
            "|  | c1 | c2 |",
            "| --- | --- | --- |",
            "| r1 | a | b |",
            "| r2 | c | d |",
        ]

    def test_hierarchical_keys_joined(self, example_table):
        md = serialize_markdown(example_table)
        assert "Urinary tract / Kidney and renal pelvis" in md
        assert "Mortality / Females" in md

    def test_empty_cells_stay_empty(self):
        table = HierarchicalTable(
            "",
            CoordTree.from_nested(["r"]),
            CoordTree.from_nested(["c1", "c2"]),
            (("", "x"),),
        )
        assert "| r |  | x |" in serialize_markdown(table)

    def test_pipes_escaped(self):
        table = HierarchicalTable(
            "",
            CoordTree.from_nested(["a|b"]),
            CoordTree.from_nested(["c"]),
            (("1|2",),),
        )
        md = serialize_markdown(table)
        assert "a\\|b" in md and "1\\|2" in md

    def test_lossy_export_is_reimportable_as_flat(self, example_table):
        # A markdown reader would see joined key paths; nothing to assert
        # beyond shape here, the format is documented as lossy.
        md = serialize_markdown(example_table)
        assert len(md.splitlines()) == 2 + len(example_table.body)
