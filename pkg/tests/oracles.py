"""Independent oracles the implementation is checked against.

These deliberately avoid the production code paths: tree edit distance is
computed by exhaustive enumeration of valid edit mappings (not a dynamic
program), chrF by a separate dict-based reimplementation, and retrieval
rankings by a pure-Python cosine scan.
"""
from __future__ import annotations

from doc2table.model import HeaderNode


def _postorder(root: HeaderNode) -> tuple[list[str], list[int]]:
    """Labels in postorder plus descendant bitmasks per node."""
    labels: list[str] = []
    desc: list[int] = []

    def walk(node: HeaderNode) -> int:
        mask = 0
        for child in node.children:
            child_index = walk(child)
            mask |= desc[child_index] | (1 << child_index)
        labels.append(node.label)
        desc.append(mask)
        return len(labels) - 1

    walk(root)
    return labels, desc


def brute_tree_edit_distance(a: HeaderNode, b: HeaderNode) -> int:
    """Minimum edit-mapping cost by exhaustive enumeration.

    A valid mapping pairs nodes one-to-one preserving postorder order and
    the ancestor/descendant relation. Its cost is one per unmapped node on
    either side plus one per mapped pair with differing labels, which
    equals: |a| + |b| - (2 per exact pair + 1 per relabeled pair). The
    search maximizes those savings with a simple branch-and-bound.
    """
    labels_a, desc_a = _postorder(a)
    labels_b, desc_b = _postorder(b)
    n, m = len(labels_a), len(labels_b)
    best_savings = 0
    pairs: list[tuple[int, int]] = []

    def extend(i: int, next_j: int, savings: int) -> None:
        nonlocal best_savings
        if savings > best_savings:
            best_savings = savings
        remaining = min(n - i, m - next_j)
        if savings + 2 * remaining <= best_savings:
            return
        if i == n or next_j == m:
            return
        # Option: leave node i unmapped.
        extend(i + 1, next_j, savings)
        # Option: map node i to any later-ordered j, keeping ancestry consistent.
        for j in range(next_j, m):
            ok = True
            for pi, pj in pairs:
                if bool(desc_a[i] & (1 << pi)) != bool(desc_b[j] & (1 << pj)):
                    ok = False
                    break
            if not ok:
                continue
            pairs.append((i, j))
            gain = 2 if labels_a[i] == labels_b[j] else 1
            extend(i + 1, j + 1, savings + gain)
            pairs.pop()

    extend(0, 0, 0)
    return n + m - best_savings


def reference_chrf(candidate: str, reference: str, max_order: int = 6, beta: float = 2.0) -> float:
    """Reference chrF: per-order F at the given beta, macro-averaged.

    Whitespace is stripped before n-gram extraction; orders with no
    n-grams on either side are skipped; all orders skipped means both
    strings were empty and the score is 100.
    """
    cand_chars = [ch for ch in candidate if not ch.isspace()]
    ref_chars = [ch for ch in reference if not ch.isspace()]

    def gram_counts(chars: list[str], order: int) -> dict[tuple[str, ...], int]:
        counts: dict[tuple[str, ...], int] = {}
        for i in range(len(chars) - order + 1):
            gram = tuple(chars[i : i + order])
            counts[gram] = counts.get(gram, 0) + 1
        return counts

    per_order = []
    for order in range(1, max_order + 1):
        cand_grams = gram_counts(cand_chars, order)
        ref_grams = gram_counts(ref_chars, order)
        total_cand = sum(cand_grams.values())
        total_ref = sum(ref_grams.values())
        if total_cand == 0 and total_ref == 0:
            continue
        overlap = 0
        for gram, count in cand_grams.items():
            other = ref_grams.get(gram, 0)
            overlap += count if count < other else other
        precision = overlap / total_cand if total_cand else 0.0
        recall = overlap / total_ref if total_ref else 0.0
        if precision + recall == 0.0:
            per_order.append(0.0)
        else:
            per_order.append(
                (1 + beta**2) * precision * recall / (beta**2 * precision + recall)
            )
    if not per_order:
        return 100.0
    return 100.0 * sum(per_order) / len(per_order)


def brute_cosine_ranking(query_vector, sentence_vectors) -> list[tuple[int, float]]:
    """Rank all sentences by a pure-Python dot product, ties by id.

    Scores are quantized to 9 decimals, matching the retrieval contract.
    """
    scored = []
    for sid, vector in enumerate(sentence_vectors):
        dot = 0.0
        for x, y in zip(query_vector, vector):
            dot += float(x) * float(y)
        scored.append((sid, round(dot, 9)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def brute_round_robin(ranked_lists: list[list[tuple[int, float]]], k: int) -> list[tuple[int, float]]:
    """Independent restatement of the merge rule for golden computation."""
    out: list[tuple[int, float]] = []
    seen: set[int] = set()
    longest = max((len(lst) for lst in ranked_lists), default=0)
    for position in range(longest):
        for lst in ranked_lists:
            if position < len(lst):
                sid, score = lst[position]
                if sid not in seen:
                    seen.add(sid)
                    out.append((sid, score))
    return out[:k]
