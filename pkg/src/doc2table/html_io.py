"""Parse HTML tables into the hierarchical model and serialize them back.

Supported markup subset: ``table``, ``thead``, ``tbody``, ``tr``, ``th``,
``td`` plus ``rowspan``/``colspan`` attributes. Entities are decoded, all
other markup inside cells is stripped to its text content.

Header regions: rows inside ``thead`` (or leading rows whose cells are all
``th``) form the column-header region; leading all-header columns below it
form the row-header region. When no header markup exists at all the first
row and first column are used. Hierarchy comes from span nesting only: a
header cell spanning k columns is the parent of the cells directly beneath
it within its span (symmetric with row spans on the left). Row-header
hierarchy encoded by leading-whitespace indentation is not inferred; such
cells are flagged with a warning and parse flat.
"""
from __future__ import annotations

import html as html_lib
import logging
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

from .model import (
    CoordTree,
    HeaderNode,
    HierarchicalTable,
    leaf_label_paths,
    normalize_text,
    validate,
)

logger = logging.getLogger(__name__)

MARKDOWN_KEY_SEPARATOR = " / "


class TableInputError(ValueError):
    """The input does not contain exactly one table element."""


class TableStructureError(ValueError):
    """The table grid or header regions are structurally unusable."""


@dataclass
class GridCell:
    """A parsed cell after placement in the expanded grid."""

    text: str  # raw text, entities decoded, not yet normalized
    row_span: int
    col_span: int
    is_header: bool
    origin: tuple[int, int]


@dataclass
class Grid:
    """Dense expanded grid: every slot references its originating cell."""

    cells: list[GridCell]
    slots: list[list[GridCell]]  # slots[r][c] -> covering cell
    thead_rows: int

    @property
    def n_rows(self) -> int:
        return len(self.slots)

    @property
    def n_cols(self) -> int:
        return len(self.slots[0]) if self.slots else 0


@dataclass
class _RawCell:
    chunks: list[str] = field(default_factory=list)
    row_span: int = 1
    col_span: int = 1
    is_header: bool = False

    @property
    def text(self) -> str:
        return "".join(self.chunks)


class _TableHtmlParser(HTMLParser):
    """Collects rows of raw cells from the single table in the input."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.table_count = 0
        self.rows: list[tuple[list[_RawCell], bool]] = []  # (cells, from_thead)
        self._in_table = False
        self._in_thead = False
        self._row: list[_RawCell] | None = None
        self._cell: _RawCell | None = None

    def handle_starttag(self, tag: str, attrs) -> None:
        tag = tag.lower()
        if tag == "table":
            self.table_count += 1
            self._in_table = True
            return
        if not self._in_table:
            return
        if tag == "thead":
            self._in_thead = True
        elif tag == "tr":
            self._close_row()
            self._row = []
        elif tag in ("td", "th"):
            if self._row is None:
                self._row = []
            self._close_cell()
            attr_map = dict(attrs)
            self._cell = _RawCell(
                row_span=_parse_span(attr_map.get("rowspan")),
                col_span=_parse_span(attr_map.get("colspan")),
                is_header=(tag == "th") or self._in_thead,
            )
        elif tag == "br" and self._cell is not None:
            self._cell.chunks.append(" ")

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        if tag == "table":
            self._close_row()
            self._in_table = False
        elif tag == "thead":
            self._in_thead = False
        elif tag == "tr":
            self._close_row()
        elif tag in ("td", "th"):
            self._close_cell()

    def handle_data(self, data: str) -> None:
        if self._cell is not None:
            self._cell.chunks.append(data)

    def _close_cell(self) -> None:
        if self._cell is not None and self._row is not None:
            self._row.append(self._cell)
        self._cell = None

    def _close_row(self) -> None:
        self._close_cell()
        if self._row is not None and self._row:
            self.rows.append((self._row, self._in_thead))
        self._row = None


def _parse_span(value: str | None) -> int:
    if value is None:
        return 1
    try:
        span = int(value.strip())
    except (ValueError, AttributeError):
        return 1
    return max(1, span)


def parse_grid(html_text: str) -> Grid:
    """Parse and span-expand the single table in ``html_text``.

    Raises :class:`TableInputError` unless exactly one ``table`` element is
    present, and :class:`TableStructureError` (naming the offending
    row/column) when span expansion does not produce a dense rectangle.
    """
    parser = _TableHtmlParser()
    parser.feed(html_text)
    parser.close()
    if parser.table_count != 1:
        raise TableInputError(f"expected exactly one table element, found {parser.table_count}")
    if not parser.rows:
        raise TableStructureError("table has no rows")

    n_rows = len(parser.rows)
    occupied: dict[tuple[int, int], GridCell] = {}
    cells: list[GridCell] = []
    thead_rows = 0
    for r, (raw_cells, from_thead) in enumerate(parser.rows):
        if from_thead and thead_rows == r:
            thead_rows = r + 1
        c = 0
        for raw in raw_cells:
            while (r, c) in occupied:
                c += 1
            row_span = min(raw.row_span, n_rows - r)  # clamp overhang, as browsers do
            cell = GridCell(raw.text, row_span, raw.col_span, raw.is_header, (r, c))
            cells.append(cell)
            for dr in range(row_span):
                for dc in range(raw.col_span):
                    slot = (r + dr, c + dc)
                    if slot in occupied:
                        raise TableStructureError(
                            f"overlapping spans at row {slot[0]}, column {slot[1]}"
                        )
                    occupied[slot] = cell

    n_cols = max(c for (_, c) in occupied) + 1
    slots: list[list[GridCell]] = []
    for r in range(n_rows):
        row = []
        for c in range(n_cols):
            cell = occupied.get((r, c))
            if cell is None:
                raise TableStructureError(
                    f"grid is not rectangular: no cell covers row {r}, column {c}"
                )
            row.append(cell)
        slots.append(row)
    return Grid(cells, slots, thead_rows)


def _header_regions(grid: Grid) -> tuple[int, int]:
    """Return (header height H, header width W), falling back to 1 each."""
    if grid.thead_rows:
        h = grid.thead_rows
    else:
        h = 0
        for row in grid.slots:
            if all(cell.is_header for cell in row):
                h += 1
            else:
                break
    if h == 0:
        h = 1
    if h >= grid.n_rows:
        raise TableStructureError("no body rows below the column-header region")

    w = 0
    for c in range(grid.n_cols):
        if all(grid.slots[r][c].is_header for r in range(h, grid.n_rows)):
            w += 1
        else:
            break
    if w == 0:
        w = 1
    if w >= grid.n_cols:
        raise TableStructureError("no body columns right of the row-header region")
    return h, w


def _chain(grid: Grid, fixed_low: int, fixed_high: int, index: int, by_row: bool) -> list[GridCell]:
    chain: list[GridCell] = []
    for k in range(fixed_low, fixed_high):
        cell = grid.slots[k][index] if by_row else grid.slots[index][k]
        if not chain or chain[-1] is not cell:
            chain.append(cell)
    return chain


def _build_forest(chains: list[list[GridCell]], depth: int) -> tuple[HeaderNode, ...]:
    """Trie over cell-identity chains; one leaf per chain end.

    A region cell that ends several adjacent chains (a bottom-boundary
    header spanning k lanes) yields k identically-labeled leaves so the
    leaf count always matches the body dimension.
    """
    nodes: list[HeaderNode] = []
    i = 0
    while i < len(chains):
        cell = chains[i][depth]
        j = i
        while j < len(chains) and chains[j][depth] is cell:
            j += 1
        group = chains[i:j]
        label = normalize_text(cell.text)
        if not label:
            raise TableStructureError(
                f"empty header label at row {cell.origin[0]}, column {cell.origin[1]}"
            )
        deeper = [ch for ch in group if len(ch) > depth + 1]
        if not deeper:
            nodes.extend(HeaderNode(label) for _ in group)
        else:
            # Rectangular spans make "ends here" a property of the cell, so a
            # group either all continues or all stops.
            if len(deeper) != len(group):
                raise TableStructureError(
                    f"inconsistent header nesting under cell at row "
                    f"{cell.origin[0]}, column {cell.origin[1]}"
                )
            nodes.append(HeaderNode(label, _build_forest(group, depth + 1)))
        i = j
    return tuple(nodes)


_INDENT_PATTERN = re.compile(r"^[ \xa0]{2,}\S")


def _warn_indentation(cells: list[GridCell]) -> None:
    for cell in cells:
        raw = cell.text.strip("\r\n")
        if _INDENT_PATTERN.match(raw):
            logger.warning(
                "row-header cell at %s starts with indentation %r; "
                "indentation-encoded hierarchy is not inferred and the cell parses flat",
                cell.origin,
                raw[:20],
            )


def parse_html_table(html_text: str) -> HierarchicalTable:
    """Parse the single HTML table in ``html_text`` into a validated model."""
    grid = parse_grid(html_text)
    h, w = _header_regions(grid)

    top_chains = [_chain(grid, 0, h, c, by_row=True) for c in range(w, grid.n_cols)]
    left_chains = [_chain(grid, 0, w, r, by_row=False) for r in range(h, grid.n_rows)]
    _warn_indentation([ch[-1] for ch in left_chains])

    top = CoordTree(_build_forest(top_chains, 0))
    left = CoordTree(_build_forest(left_chains, 0))

    stub_cells: list[GridCell] = []
    for cell in grid.cells:
        if cell.origin[0] < h and cell.origin[1] < w:
            stub_cells.append(cell)
    stub = normalize_text(" ".join(c.text for c in stub_cells))

    body = tuple(
        tuple(grid.slots[r][c].text for c in range(w, grid.n_cols))
        for r in range(h, grid.n_rows)
    )
    table = HierarchicalTable(stub, left, top, body)
    report = validate(table)
    if not report.ok:
        raise TableStructureError("; ".join(report.errors))
    return table


def _subtree_leaves(node: HeaderNode) -> int:
    if node.is_leaf:
        return 1
    return sum(_subtree_leaves(c) for c in node.children)


def _nodes_by_depth(tree: CoordTree) -> list[list[HeaderNode]]:
    levels: list[list[HeaderNode]] = [[] for _ in range(tree.depth)]

    def walk(node: HeaderNode, depth: int) -> None:
        levels[depth].append(node)
        for child in node.children:
            walk(child, depth + 1)

    for root in tree.roots:
        walk(root, 0)
    return levels


def _span_attrs(row_span: int, col_span: int) -> str:
    attrs = ""
    if row_span > 1:
        attrs += f' rowspan="{row_span}"'
    if col_span > 1:
        attrs += f' colspan="{col_span}"'
    return attrs


def serialize_html(table: HierarchicalTable) -> str:
    """Emit canonical HTML; parsing it back restores the identical model."""
    report = validate(table)
    if not report.ok:
        raise TableStructureError("; ".join(report.errors))

    h = table.top.depth
    w = table.left.depth
    esc = lambda s: html_lib.escape(s)

    lines = ["<table>", "<thead>"]
    top_levels = _nodes_by_depth(table.top)
    for depth, level in enumerate(top_levels):
        cells = []
        if depth == 0:
            cells.append(f"<th{_span_attrs(h, w)}>{esc(table.stub_header)}</th>")
        for node in level:
            row_span = h - depth if node.is_leaf else 1
            cells.append(f"<th{_span_attrs(row_span, _subtree_leaves(node))}>{esc(node.label)}</th>")
        lines.append("<tr>" + "".join(cells) + "</tr>")
    lines.append("</thead>")

    lines.append("<tbody>")
    starts: dict[int, list[tuple[int, HeaderNode]]] = {}

    def assign(node: HeaderNode, depth: int, first_row: int) -> int:
        starts.setdefault(first_row, []).append((depth, node))
        if node.is_leaf:
            return first_row + 1
        row = first_row
        for child in node.children:
            row = assign(child, depth + 1, row)
        return row

    row = 0
    for root in table.left.roots:
        row = assign(root, 0, row)

    for r in range(len(table.body)):
        cells = []
        for depth, node in starts.get(r, []):
            col_span = w - depth if node.is_leaf else 1
            cells.append(f"<th{_span_attrs(_subtree_leaves(node), col_span)}>{esc(node.label)}</th>")
        for value in table.body[r]:
            cells.append(f"<td>{esc(value)}</td>")
        lines.append("<tr>" + "".join(cells) + "</tr>")
    lines.append("</tbody>")
    lines.append("</table>")
    return "\n".join(lines)


def serialize_markdown(table: HierarchicalTable) -> str:
    """Flat, lossy markdown export.

    Hierarchical key paths are joined into single header strings with
    ``" / "``; the tree structure itself cannot be represented.
    """
    def md(s: str) -> str:
        return s.replace("|", "\\|")

    top_keys = [MARKDOWN_KEY_SEPARATOR.join(p) for p in leaf_label_paths(table.top)]
    header = [md(table.stub_header)] + [md(k) for k in top_keys]
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("| " + " | ".join("---" for _ in header) + " |")
    left_keys = [MARKDOWN_KEY_SEPARATOR.join(p) for p in leaf_label_paths(table.left)]
    for key, row in zip(left_keys, table.body):
        lines.append("| " + " | ".join([md(key)] + [md(c) for c in row]) + " |")
    return "\n".join(lines)
