"""Dataset annotation: match table cells to document sentences and filter.

Numeric cells are matched by a normalized-number rule: currency symbols
and thousands separators ("," and " ") are stripped and parenthesized
negatives unify to a minus sign, then the full normalized number must
appear as a token in the sentence. Sign-only differences still match but
the flip is recorded. Textual cells match by case-insensitive whole-phrase
containment after whitespace normalization. Every candidate sentence is
kept: multiple matches per cell are expected and resolved by manual
review, which this module models as a status field (auto / confirmed /
rejected) edited through a JSONL review file.

A table stays in the dataset only while fewer than 30% of its body cells
lack a non-rejected match; the 30.0% boundary itself is excluded. Header
and stub cells are not counted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .html_io import serialize_markdown
from .model import (
    HierarchicalTable,
    TreeCoord,
    leaf_coords,
    leaf_label_paths,
    normalize_text,
)
from .retrieval import DocumentStore

UNCOVERED_EXCLUSION_NUM = 3  # exclude iff uncovered/total >= 3/10, compared exactly
UNCOVERED_EXCLUSION_DEN = 10

_CURRENCY = "$€£¥"

_NUMBER_TOKEN = re.compile(
    r"""
    (\()?                                   # parenthesized negative, open
    \s*(-|−)?\s*                       # explicit minus
    [{cur}]?\s?
    (
        \d{{1,3}}(?:,\s?\d{{3}})+(?:\.\d+)? # comma-grouped, tolerate ", " spacing
        | \d{{1,3}}(?:\ \d{{3}})+(?:\.\d+)? # space-grouped thousands
        | \d+(?:\.\d+)?                     # plain integer / decimal
    )
    \s*(\))?
    """.format(cur=_CURRENCY),
    re.VERBOSE,
)


def canonical_magnitude(digits: str) -> str:
    """Canonical unsigned form: separators removed, zero-padding trimmed."""
    plain = re.sub(r"[,\s]", "", digits)
    if "." in plain:
        integer, fraction = plain.split(".", 1)
        fraction = fraction.rstrip("0")
        integer = integer.lstrip("0") or "0"
        return f"{integer}.{fraction}" if fraction else integer
    return plain.lstrip("0") or "0"


def parse_cell_number(cell_text: str) -> tuple[str, bool] | None:
    """(canonical magnitude, is_negative) when the whole cell is one number."""
    text = normalize_text(cell_text)
    if not text:
        return None
    negative = False
    if text.startswith("(") and text.endswith(")"):
        negative = True
        text = text[1:-1].strip()
    if text.startswith(("-", "−")):
        negative = True
        text = text[1:].strip()
    text = text.lstrip(_CURRENCY).strip()
    if text.endswith("%"):
        text = text[:-1].strip()
    match = _NUMBER_TOKEN.fullmatch(text)
    if not match or match.group(1) or match.group(2) or match.group(4):
        return None
    return canonical_magnitude(match.group(3)), negative


def sentence_numbers(sentence: str) -> list[tuple[str, bool]]:
    """All (canonical magnitude, is_negative) tokens in a sentence."""
    tokens = []
    for match in _NUMBER_TOKEN.finditer(normalize_text(sentence)):
        negative = bool(match.group(2)) or bool(match.group(1) and match.group(4))
        tokens.append((canonical_magnitude(match.group(3)), negative))
    return tokens


@dataclass
class CellMatch:
    """Sentences matching one body cell, plus its review status."""

    row: int
    col: int
    left_coord: TreeCoord
    top_coord: TreeCoord
    kind: str  # "numeric" | "textual"
    sentence_ids: tuple[int, ...]
    matched_token: str | None = None  # canonical magnitude, numeric cells only
    sign_flip_ids: tuple[int, ...] = ()  # matched with opposite sign
    status: str = "auto"  # auto | confirmed | rejected

    @property
    def match_id(self) -> str:
        return f"{self.row},{self.col}"


def match_cells_to_sentences(table: HierarchicalTable, store: DocumentStore) -> list[CellMatch]:
    """Locate candidate sentences for every body cell; empty cells match nothing."""
    left_cs = leaf_coords(table.left)
    top_cs = leaf_coords(table.top)
    normalized_sentences = [normalize_text(s.raw) for s in store.sentences]
    numbers_per_sentence = [sentence_numbers(s) for s in normalized_sentences]
    lowered_sentences = [s.lower() for s in normalized_sentences]

    matches: list[CellMatch] = []
    for r, row in enumerate(table.body):
        for c, cell in enumerate(row):
            if not cell:
                continue
            number = parse_cell_number(cell)
            if number is not None:
                magnitude, negative = number
                hit_ids: list[int] = []
                flips: list[int] = []
                for sid, tokens in enumerate(numbers_per_sentence):
                    signs = {neg for mag, neg in tokens if mag == magnitude}
                    if not signs:
                        continue
                    hit_ids.append(sid)
                    if negative not in signs:
                        flips.append(sid)
                if hit_ids:
                    matches.append(
                        CellMatch(
                            r, c, left_cs[r], top_cs[c], "numeric",
                            tuple(hit_ids), magnitude, tuple(flips),
                        )
                    )
            else:
                phrase = re.escape(cell.lower())
                pattern = re.compile(rf"(?<!\w){phrase}(?!\w)")
                hit_ids = [
                    sid for sid, text in enumerate(lowered_sentences) if pattern.search(text)
                ]
                if hit_ids:
                    matches.append(
                        CellMatch(r, c, left_cs[r], top_cs[c], "textual", tuple(hit_ids))
                    )
    return matches


def apply_review(matches: list[CellMatch], decisions: dict[str, str]) -> list[CellMatch]:
    """Apply review decisions (match_id -> confirmed/rejected) in place."""
    for match in matches:
        status = decisions.get(match.match_id)
        if status in ("confirmed", "rejected"):
            match.status = status
    return matches


def coverage_ratio(table: HierarchicalTable, matches: list[CellMatch]) -> float:
    """Fraction of body cells with at least one non-rejected match."""
    covered = {(m.row, m.col) for m in matches if m.status != "rejected"}
    total = len(table.body) * (len(table.body[0]) if table.body else 0)
    return len(covered) / total if total else 0.0


def is_excluded(table: HierarchicalTable, matches: list[CellMatch]) -> bool:
    """Exact integer form of the exclusion rule: uncovered/total >= 30%."""
    covered = {(m.row, m.col) for m in matches if m.status != "rejected"}
    total = len(table.body) * (len(table.body[0]) if table.body else 0)
    uncovered = total - len(covered)
    return uncovered * UNCOVERED_EXCLUSION_DEN >= UNCOVERED_EXCLUSION_NUM * total


@dataclass(frozen=True)
class Exclusion:
    index: int
    coverage: float
    uncovered: float


def filter_tables(
    candidates: list[tuple[HierarchicalTable, list[CellMatch]]],
) -> tuple[list[tuple[HierarchicalTable, list[CellMatch]]], list[Exclusion]]:
    """Keep tables below the uncovered threshold; log the dropped ones."""
    retained = []
    exclusions = []
    for index, (table, matches) in enumerate(candidates):
        coverage = coverage_ratio(table, matches)
        if is_excluded(table, matches):
            exclusions.append(Exclusion(index, coverage, 1.0 - coverage))
        else:
            retained.append((table, matches))
    return retained, exclusions


@dataclass(frozen=True)
class QaTriple:
    triple_id: str
    doc_id: str
    question: str
    table: HierarchicalTable
    relevant_sentence_ids: tuple[int, ...]


def relevant_ids(matches: list[CellMatch]) -> tuple[int, ...]:
    """Union of matched sentence ids over non-rejected matches, sorted."""
    ids: set[int] = set()
    for match in matches:
        if match.status != "rejected":
            ids.update(match.sentence_ids)
    return tuple(sorted(ids))


def build_question_prompt(table: HierarchicalTable) -> str:
    """Deterministic prompt asking for questions this exact table answers."""
    paths = [
        " > ".join(left) + " x " + " > ".join(top)
        for left in leaf_label_paths(table.left)
        for top in leaf_label_paths(table.top)
    ]
    return "\n".join(
        [
            "Here is a table:",
            "",
            serialize_markdown(table),
            "",
            "Its cells, as row-path x column-path keys:",
            "\n".join(f"- {p}" for p in paths),
            "",
            "Write questions that this table answers exactly: every cell above is",
            "needed for the answer and nothing else is. Prefer questions that ask",
            "for comparisons across the table's rows and columns.",
            "",
            "Reply with exactly one fenced code block containing a JSON list of",
            "question strings:",
            "",
            "```json",
            '["<question>"]',
            "```",
        ]
    )


@dataclass(frozen=True)
class QuestionDraft:
    """A generated question moving through manual refinement."""

    text: str
    status: str = "generated"  # generated | refined | accepted


@dataclass(frozen=True)
class CorpusStats:
    n_triples: int
    mean_input_tokens: float | None
    mean_rows: float
    mean_cols: float
    n_flat: int
    n_hierarchical: int

    def to_dict(self) -> dict:
        return {
            "n_triples": self.n_triples,
            "mean_input_tokens": self.mean_input_tokens,
            "mean_rows": self.mean_rows,
            "mean_cols": self.mean_cols,
            "n_flat": self.n_flat,
            "n_hierarchical": self.n_hierarchical,
        }


def corpus_stats(
    triples: list[QaTriple],
    documents: dict[str, DocumentStore] | None = None,
) -> CorpusStats:
    """Dataset-level statistics: sizes, mean dimensions, flat/hierarchical split.

    Input length (whitespace tokens of the triple's document) is reported
    only when the documents are supplied.
    """
    if not triples:
        return CorpusStats(0, None, 0.0, 0.0, 0, 0)
    rows = [len(t.table.body) for t in triples]
    cols = [len(t.table.body[0]) if t.table.body else 0 for t in triples]
    n_flat = sum(1 for t in triples if t.table.is_flat)

    mean_tokens: float | None = None
    if documents is not None:
        token_counts = []
        for triple in triples:
            store = documents[triple.doc_id]
            token_counts.append(sum(len(s.raw.split()) for s in store.sentences))
        mean_tokens = sum(token_counts) / len(token_counts)

    return CorpusStats(
        n_triples=len(triples),
        mean_input_tokens=mean_tokens,
        mean_rows=sum(rows) / len(rows),
        mean_cols=sum(cols) / len(cols),
        n_flat=n_flat,
        n_hierarchical=len(triples) - n_flat,
    )
