"""Deterministic evaluation metrics for generated tables and retrieval.

Structure similarity lives in :mod:`doc2table.treedist`; this module adds
the character n-gram F-score, key-value content similarity, header
similarity and top-K recall, plus assembly of the JSON evaluation report.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .html_io import serialize_html
from .model import HierarchicalTable, flatten_to_kv, leaf_label_paths
from .treedist import teds

CHRF_MAX_ORDER = 6
CHRF_BETA = 2.0
KEY_MATCH_THRESHOLD = 0.5
KEY_JOIN = " / "

ValueScorer = Callable[[str, str], float]


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given inputs."""


def _char_ngrams(text: str, n: int) -> Counter:
    chars = "".join(text.split())
    return Counter(chars[i : i + n] for i in range(len(chars) - n + 1))


def chrf(candidate: str, reference: str) -> float:
    """Character n-gram F-score in [0, 100].

    Whitespace is removed before n-gram extraction; n-gram orders 1..6 are
    scored with an F-score at beta=2 and macro-averaged. Orders where
    neither string has any n-grams are skipped; if every order is skipped
    (both strings empty) the score is 100, and a single empty side scores 0.
    """
    beta_sq = CHRF_BETA**2
    f_scores = []
    for n in range(1, CHRF_MAX_ORDER + 1):
        cand = _char_ngrams(candidate, n)
        ref = _char_ngrams(reference, n)
        total_cand = sum(cand.values())
        total_ref = sum(ref.values())
        if total_cand == 0 and total_ref == 0:
            continue
        matched = sum((cand & ref).values())
        precision = matched / total_cand if total_cand else 0.0
        recall = matched / total_ref if total_ref else 0.0
        if precision + recall == 0.0:
            f_scores.append(0.0)
        else:
            f_scores.append(
                (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
            )
    if not f_scores:
        return 100.0
    return 100.0 * sum(f_scores) / len(f_scores)


def chrf_value_scorer(candidate: str, reference: str) -> float:
    """Default cell-value scorer: chrF rescaled to [0, 1]."""
    return chrf(candidate, reference) / 100.0


@dataclass(frozen=True)
class PairScore:
    """Per ground-truth cell: its key, the matched generated key (if any),
    and the value score of the match."""

    gt_key: tuple[tuple[str, ...], tuple[str, ...]]
    gen_key: tuple[tuple[str, ...], tuple[str, ...]] | None
    score: float


@dataclass(frozen=True)
class ContentReport:
    pairs: tuple[PairScore, ...]
    precision: float
    recall: float
    f1: float
    n_generated: int
    n_groundtruth: int


def _joined_key(left: tuple[str, ...], top: tuple[str, ...]) -> str:
    return KEY_JOIN.join(left) + KEY_JOIN + KEY_JOIN.join(top)


def content_similarity(
    generated: HierarchicalTable,
    groundtruth: HierarchicalTable,
    value_scorer: ValueScorer = chrf_value_scorer,
) -> ContentReport:
    """Key-value content similarity between two tables.

    Both tables are flattened to key-value triples. Pairs are matched
    greedily by descending key similarity: exact key equality first, then
    chrF over the joined key strings with a 0.5 floor; ties break by
    document order (ground truth first). Each side is matched at most
    once. The matched pair's score comes from ``value_scorer`` over the
    two cell texts; precision divides the score sum by the generated pair
    count, recall by the ground-truth pair count.
    """
    gen = flatten_to_kv(generated)
    gt = flatten_to_kv(groundtruth)

    candidates: list[tuple[int, float, int, int]] = []
    for t_idx, t in enumerate(gt):
        t_key = (t.left_key, t.top_key)
        t_joined = _joined_key(*t_key)
        for g_idx, g in enumerate(gen):
            g_key = (g.left_key, g.top_key)
            if g_key == t_key:
                candidates.append((0, 0.0, t_idx, g_idx))
                continue
            sim = chrf(_joined_key(*g_key), t_joined) / 100.0
            if sim >= KEY_MATCH_THRESHOLD:
                candidates.append((1, -sim, t_idx, g_idx))
    candidates.sort()

    matched_gen: dict[int, float] = {}
    gt_match: dict[int, int] = {}
    for _, _, t_idx, g_idx in candidates:
        if t_idx in gt_match or g_idx in matched_gen:
            continue
        gt_match[t_idx] = g_idx
        matched_gen[g_idx] = value_scorer(gen[g_idx].value, gt[t_idx].value)

    pairs = []
    total = 0.0
    for t_idx, t in enumerate(gt):
        g_idx = gt_match.get(t_idx)
        if g_idx is None:
            pairs.append(PairScore((t.left_key, t.top_key), None, 0.0))
        else:
            score = matched_gen[g_idx]
            total += score
            pairs.append(
                PairScore(
                    (t.left_key, t.top_key),
                    (gen[g_idx].left_key, gen[g_idx].top_key),
                    score,
                )
            )

    precision = total / len(gen) if gen else 0.0
    recall = total / len(gt) if gt else 0.0
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return ContentReport(tuple(pairs), precision, recall, f1, len(gen), len(gt))


@dataclass(frozen=True)
class HeaderScore:
    precision: float
    recall: float
    f1: float


def header_similarity(generated, groundtruth, side: str) -> HeaderScore:
    """Header content score for one side ("left" or "top").

    Leaf key paths are aligned by position and scored with chrF over the
    joined paths; precision divides by the generated leaf count, recall by
    the ground-truth leaf count. This is an interpretation choice: no
    canonical definition of header-only content scoring exists.
    """
    gen_tree = generated.left if side == "left" else generated.top
    gt_tree = groundtruth.left if side == "left" else groundtruth.top
    gen_paths = [KEY_JOIN.join(p) for p in leaf_label_paths(gen_tree)]
    gt_paths = [KEY_JOIN.join(p) for p in leaf_label_paths(gt_tree)]
    total = sum(
        chrf(g, t) / 100.0 for g, t in zip(gen_paths, gt_paths)
    )
    precision = total / len(gen_paths) if gen_paths else 0.0
    recall = total / len(gt_paths) if gt_paths else 0.0
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return HeaderScore(precision, recall, f1)


def recall_at_k(ranked: Sequence[int], relevant: Iterable[int], k: int) -> float:
    """Fraction of relevant ids appearing in the first k of the ranking."""
    relevant_set = set(relevant)
    if not relevant_set:
        raise UndefinedMetricError("recall@k is undefined for an empty relevant set")
    if k < 1:
        raise UndefinedMetricError(f"k must be >= 1, got {k}")
    hits = relevant_set.intersection(ranked[:k])
    return len(hits) / len(relevant_set)


def table_scores(
    generated: HierarchicalTable,
    groundtruth: HierarchicalTable,
    value_scorer: ValueScorer = chrf_value_scorer,
) -> dict:
    """All per-pair table metrics as a JSON-ready mapping."""
    content = content_similarity(generated, groundtruth, value_scorer)
    return {
        "teds": teds(generated, groundtruth),
        "content_precision": content.precision,
        "content_recall": content.recall,
        "content_f1": content.f1,
        "header_f1": {
            "left": header_similarity(generated, groundtruth, "left").f1,
            "top": header_similarity(generated, groundtruth, "top").f1,
        },
    }


def aggregate_scores(items: list[dict]) -> dict:
    """Corpus aggregate: plain mean of every per-item numeric field."""
    if not items:
        return {}

    def mean(values: list[float]) -> float:
        return sum(values) / len(values)

    agg: dict = {
        "n_items": len(items),
        "teds": mean([i["teds"] for i in items]),
        "content_precision": mean([i["content_precision"] for i in items]),
        "content_recall": mean([i["content_recall"] for i in items]),
        "content_f1": mean([i["content_f1"] for i in items]),
        "header_f1": {
            "left": mean([i["header_f1"]["left"] for i in items]),
            "top": mean([i["header_f1"]["top"] for i in items]),
        },
    }
    with_recall = [i for i in items if "recall_at_k" in i]
    if with_recall:
        ks = sorted({k for i in with_recall for k in i["recall_at_k"]}, key=int)
        agg["recall_at_k"] = {
            k: mean([i["recall_at_k"][k] for i in with_recall if k in i["recall_at_k"]])
            for k in ks
        }
    return agg


def build_llm_judge_prompt(generated: HierarchicalTable, groundtruth: HierarchicalTable) -> str:
    """Prompt for an external LLM judge scoring content and structure 0-10.

    No judge is bundled; callers send this through their own chat provider
    and parse the two numbers themselves.
    """
    return (
        "You are grading a generated table against a reference table.\n"
        "Score two aspects independently on a 0-10 scale:\n"
        "1. content: are the cell values correct and complete?\n"
        "2. structure: do the row/column headers and their hierarchy match?\n"
        "\nReference table:\n"
        f"{serialize_html(groundtruth)}\n"
        "\nGenerated table:\n"
        f"{serialize_html(generated)}\n"
        "\nReply with exactly two lines:\n"
        "content: <0-10>\n"
        "structure: <0-10>\n"
    )
