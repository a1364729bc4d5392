"""Data model for hierarchical tables addressed by paired header-tree coordinates.

A table is a stub header, an ordered tree of row-header cells (the *left*
tree), an ordered tree of column-header cells (the *top* tree), and a dense
body grid. Leaves of the left tree correspond 1:1 with body rows, leaves of
the top tree with body columns, so every body cell has exactly one pair of
tree coordinates and every cell can be flattened to a key-value triple
(row label path, column label path, cell text).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass


def normalize_text(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends.

    Case is preserved. This is the one normalization applied to header
    labels, stub text and body cells, so "61, 276" and "61,  276" compare
    equal while "61,276" stays distinct.
    """
    return " ".join(text.split())


class TableModelError(ValueError):
    """Violation of the table model's construction rules."""


class CoordError(TableModelError):
    """A tree coordinate does not resolve in its tree.

    ``depth`` is the 0-based position in the coordinate path where
    resolution failed.
    """

    def __init__(self, message: str, depth: int):
        super().__init__(message)
        self.depth = depth


@dataclass(frozen=True)
class HeaderNode:
    """One header cell: a normalized label plus ordered children."""

    label: str
    children: tuple[HeaderNode, ...] = ()

    def __post_init__(self) -> None:
        norm = normalize_text(self.label)
        if not norm:
            raise TableModelError("header label is empty after normalization")
        object.__setattr__(self, "label", norm)
        object.__setattr__(self, "children", tuple(self.children))

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class TreeCoord:
    """Child-index path from the root level down to a node, 0-based."""

    path: tuple[int, ...]

    def __post_init__(self) -> None:
        path = tuple(int(i) for i in self.path)
        if not path:
            raise TableModelError("tree coordinate must be non-empty")
        if any(i < 0 for i in path):
            raise TableModelError(f"tree coordinate has negative index: {path}")
        object.__setattr__(self, "path", path)

    def __iter__(self):
        return iter(self.path)

    def __len__(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class CoordTree:
    """Ordered forest of header cells; child order is significant."""

    roots: tuple[HeaderNode, ...]

    def __post_init__(self) -> None:
        roots = tuple(self.roots)
        if not roots:
            raise TableModelError("coordinate tree needs at least one root node")
        object.__setattr__(self, "roots", roots)

    @classmethod
    def from_nested(cls, spec) -> CoordTree:
        """Build a tree from a literal-friendly nested form.

        Each entry is either a label string (a leaf) or a
        ``(label, [children...])`` pair. Example::

            CoordTree.from_nested([("Incidence", ["Males", "Females"]), "Total"])
        """

        def build(entry) -> HeaderNode:
            if isinstance(entry, str):
                return HeaderNode(entry)
            label, children = entry
            return HeaderNode(label, tuple(build(c) for c in children))

        return cls(tuple(build(e) for e in spec))

    def to_nested(self):
        """Inverse of :meth:`from_nested` (children as lists, JSON-friendly)."""

        def dump(node: HeaderNode):
            if node.is_leaf:
                return node.label
            return [node.label, [dump(c) for c in node.children]]

        return [dump(r) for r in self.roots]

    @property
    def depth(self) -> int:
        def d(node: HeaderNode) -> int:
            return 1 + (max(d(c) for c in node.children) if node.children else 0)

        return max(d(r) for r in self.roots)

    @property
    def node_count(self) -> int:
        count = 0
        stack = list(self.roots)
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children)
        return count

    @property
    def leaf_count(self) -> int:
        return len(leaf_coords(self))


def resolve_coord(tree: CoordTree, coord: TreeCoord) -> tuple[str, ...]:
    """Return the label path addressed by ``coord``, root level first.

    Raises :class:`CoordError` naming the failing depth when any index is
    out of range.
    """
    labels: list[str] = []
    level = tree.roots
    for depth, index in enumerate(coord):
        if index >= len(level):
            raise CoordError(
                f"coordinate {tuple(coord)} out of range at depth {depth}: "
                f"index {index} >= {len(level)} children",
                depth=depth,
            )
        node = level[index]
        labels.append(node.label)
        level = node.children
    return tuple(labels)


def leaf_coords(tree: CoordTree) -> tuple[TreeCoord, ...]:
    """All leaf coordinates in document (left-to-right, preorder) order."""
    coords: list[TreeCoord] = []

    def walk(node: HeaderNode, path: tuple[int, ...]) -> None:
        if node.is_leaf:
            coords.append(TreeCoord(path))
            return
        for i, child in enumerate(node.children):
            walk(child, path + (i,))

    for i, root in enumerate(tree.roots):
        walk(root, (i,))
    return tuple(coords)


def leaf_label_paths(tree: CoordTree) -> tuple[tuple[str, ...], ...]:
    """Label path of every leaf, in the same order as :func:`leaf_coords`."""
    return tuple(resolve_coord(tree, c) for c in leaf_coords(tree))


@dataclass(frozen=True)
class KeyValueTriple:
    """A body cell flattened to (row label path, column label path, text)."""

    left_key: tuple[str, ...]
    top_key: tuple[str, ...]
    value: str

    def __post_init__(self) -> None:
        left = tuple(normalize_text(k) for k in self.left_key)
        top = tuple(normalize_text(k) for k in self.top_key)
        if not left or not top:
            raise TableModelError("key paths must be non-empty")
        object.__setattr__(self, "left_key", left)
        object.__setattr__(self, "top_key", top)
        object.__setattr__(self, "value", normalize_text(self.value))


@dataclass(frozen=True)
class HierarchicalTable:
    """Stub header + left/top coordinate trees + dense body grid.

    Construction normalizes text but does not enforce the dimension
    invariants; :func:`validate` reports them so malformed candidates can
    be diagnosed rather than silently rejected.
    """

    stub_header: str
    left: CoordTree
    top: CoordTree
    body: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "stub_header", normalize_text(self.stub_header))
        body = tuple(tuple(normalize_text(c) for c in row) for row in self.body)
        object.__setattr__(self, "body", body)

    @property
    def n_rows(self) -> int:
        return len(self.body)

    @property
    def n_cols(self) -> int:
        return len(self.body[0]) if self.body else 0

    @property
    def is_flat(self) -> bool:
        """True iff both header trees are single-level."""
        return self.left.depth == 1 and self.top.depth == 1


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.errors


def validate(table: HierarchicalTable) -> ValidationReport:
    """Check the table invariants.

    Dimension mismatches and empty labels are errors; duplicated key paths
    are warnings only, since real tables repeat labels (e.g. "Total" rows).
    """
    errors: list[str] = []
    warnings: list[str] = []

    n_left = table.left.leaf_count
    n_top = table.top.leaf_count
    if len(table.body) != n_left:
        errors.append(
            f"dimension mismatch: body has {len(table.body)} rows, "
            f"left tree has {n_left} leaves"
        )
    for i, row in enumerate(table.body):
        if len(row) != n_top:
            errors.append(
                f"dimension mismatch: body row {i} has {len(row)} cells, "
                f"top tree has {n_top} leaves"
            )

    for name, tree in (("left", table.left), ("top", table.top)):
        stack = list(tree.roots)
        while stack:
            node = stack.pop()
            if not node.label:  # unreachable through HeaderNode, kept as a guard
                errors.append(f"{name} tree contains an empty header label")
            stack.extend(node.children)
        paths = leaf_label_paths(tree)
        seen: set[tuple[str, ...]] = set()
        for path in paths:
            if path in seen:
                warnings.append(f"duplicate {name} key path: {' / '.join(path)}")
            seen.add(path)

    return ValidationReport(tuple(errors), tuple(warnings))


def flatten_to_kv(table: HierarchicalTable) -> tuple[KeyValueTriple, ...]:
    """One triple per body cell in row-major order.

    Keys are the label paths of the cell's leaf coordinates; the stub
    header never appears in a key.
    """
    left_paths = leaf_label_paths(table.left)
    top_paths = leaf_label_paths(table.top)
    if len(table.body) != len(left_paths) or any(
        len(row) != len(top_paths) for row in table.body
    ):
        raise TableModelError("cannot flatten: body dimensions do not match header leaves")
    return tuple(
        KeyValueTriple(left_paths[r], top_paths[c], table.body[r][c])
        for r in range(len(left_paths))
        for c in range(len(top_paths))
    )


def body_from_kv(
    left: CoordTree,
    top: CoordTree,
    triples: tuple[KeyValueTriple, ...] | list[KeyValueTriple],
) -> tuple[tuple[str, ...], ...]:
    """Rebuild a body grid from triples against the given trees.

    Duplicated key paths are resolved in document order (first triple with
    a key pair fills the first grid position with that pair), so
    ``body_from_kv(t.left, t.top, flatten_to_kv(t)) == t.body``.
    """
    left_paths = leaf_label_paths(left)
    top_paths = leaf_label_paths(top)
    positions: dict[tuple[tuple[str, ...], tuple[str, ...]], deque[tuple[int, int]]] = {}
    for r, lp in enumerate(left_paths):
        for c, tp in enumerate(top_paths):
            positions.setdefault((lp, tp), deque()).append((r, c))

    grid: list[list[str | None]] = [[None] * len(top_paths) for _ in left_paths]
    for triple in triples:
        key = (triple.left_key, triple.top_key)
        slots = positions.get(key)
        if not slots:
            raise TableModelError(
                f"no remaining grid position for key pair "
                f"{' / '.join(triple.left_key)} x {' / '.join(triple.top_key)}"
            )
        r, c = slots.popleft()
        grid[r][c] = triple.value
    missing = [(r, c) for r in range(len(left_paths)) for c in range(len(top_paths)) if grid[r][c] is None]
    if missing:
        raise TableModelError(f"triples do not cover grid positions: {missing}")
    return tuple(tuple(c for c in row if c is not None) for row in grid)
