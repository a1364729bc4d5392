"""Ordered-tree edit distance and the structure-similarity score built on it.

The distance is the classic Zhang–Shasha dynamic program over postorder
node numbering with unit insert/delete costs and a 0/1 relabel cost
(0 iff the normalized labels are equal).

Structure similarity compares header trees only: both coordinate trees of
a table hang under a synthetic root so one number reflects both regions,
and body content never leaks into the structural score.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import CoordTree, HeaderNode, HierarchicalTable

ROOT_SENTINEL = "[table]"
LEFT_SENTINEL = "[rows]"
TOP_SENTINEL = "[columns]"


def structure_tree(table: HierarchicalTable) -> HeaderNode:
    """Combined header tree: sentinel root over the left and top trees.

    Node count is always 3 + left nodes + top nodes.
    """
    return HeaderNode(
        ROOT_SENTINEL,
        (
            HeaderNode(LEFT_SENTINEL, table.left.roots),
            HeaderNode(TOP_SENTINEL, table.top.roots),
        ),
    )


def node_count(tree: HeaderNode) -> int:
    count = 0
    stack = [tree]
    while stack:
        node = stack.pop()
        count += 1
        stack.extend(node.children)
    return count


@dataclass
class _PostOrder:
    """Postorder arrays for the Zhang–Shasha dynamic program."""

    labels: list[str]
    lml: list[int]  # index of the leftmost leaf descendant, per node
    keyroots: list[int]

    @classmethod
    def build(cls, root: HeaderNode) -> _PostOrder:
        labels: list[str] = []
        lml: list[int] = []

        def walk(node: HeaderNode) -> int:
            first_leaf = -1
            for child in node.children:
                child_first = walk(child)
                if first_leaf == -1:
                    first_leaf = child_first
            index = len(labels)
            if first_leaf == -1:
                first_leaf = index
            labels.append(node.label)
            lml.append(first_leaf)
            return first_leaf

        walk(root)
        seen: set[int] = set()
        keyroots = []
        for i in range(len(labels) - 1, -1, -1):
            if lml[i] not in seen:
                keyroots.append(i)
                seen.add(lml[i])
        keyroots.reverse()
        return cls(labels, lml, keyroots)


def tree_edit_distance(a: HeaderNode, b: HeaderNode) -> int:
    """Minimum number of node inserts, deletes and relabels turning a into b."""
    ta = _PostOrder.build(a)
    tb = _PostOrder.build(b)
    n, m = len(ta.labels), len(tb.labels)
    td = [[0] * m for _ in range(n)]

    for i in ta.keyroots:
        for j in tb.keyroots:
            _forest_distance(ta, tb, i, j, td)
    return td[n - 1][m - 1]


def _forest_distance(ta: _PostOrder, tb: _PostOrder, i: int, j: int, td: list[list[int]]) -> None:
    li, lj = ta.lml[i], tb.lml[j]
    rows = i - li + 2
    cols = j - lj + 2
    fd = [[0] * cols for _ in range(rows)]
    for x in range(1, rows):
        fd[x][0] = fd[x - 1][0] + 1
    for y in range(1, cols):
        fd[0][y] = fd[0][y - 1] + 1

    for x in range(1, rows):
        di = li + x - 1  # postorder index in a
        for y in range(1, cols):
            dj = lj + y - 1
            if ta.lml[di] == li and tb.lml[dj] == lj:
                rename = 0 if ta.labels[di] == tb.labels[dj] else 1
                fd[x][y] = min(
                    fd[x - 1][y] + 1,
                    fd[x][y - 1] + 1,
                    fd[x - 1][y - 1] + rename,
                )
                td[di][dj] = fd[x][y]
            else:
                fd[x][y] = min(
                    fd[x - 1][y] + 1,
                    fd[x][y - 1] + 1,
                    fd[ta.lml[di] - li][tb.lml[dj] - lj] + td[di][dj],
                )


def teds(a: HierarchicalTable, b: HierarchicalTable) -> float:
    """Structure similarity in [0, 1]: 1 - distance / max tree size.

    Sibling-order and ancestry constraints can make the edit distance
    exceed the larger tree's node count for heavily disjoint shapes, which
    would push the raw formula below zero; the score is clamped at 0 so
    the documented [0, 1] range always holds.
    """
    sa = structure_tree(a)
    sb = structure_tree(b)
    distance = tree_edit_distance(sa, sb)
    return max(0.0, 1.0 - distance / max(node_count(sa), node_count(sb)))


def header_forest(tree: CoordTree, sentinel: str) -> HeaderNode:
    """Wrap one coordinate tree under a sentinel for standalone comparison."""
    return HeaderNode(sentinel, tree.roots)
