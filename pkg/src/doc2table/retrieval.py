"""Question decomposition, sentence rewriting and top-K cosine retrieval.

Questions are rewritten into sub-questions and document sentences into a
data-as-subject form by a rewrite provider; retrieval then ranks sentences
per sub-question by cosine similarity of embeddings and merges the ranked
lists into one top-K budget. Raw sentence text is always preserved: the
rewritten form is a retrieval aid only, downstream consumers cite the
document verbatim.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .providers import Rewriter

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 30

DEFAULT_ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "vs.", "etc.", "inc.", "ltd.",
        "co.", "corp.", "no.", "nos.", "fig.", "figs.", "est.", "approx.", "dept.",
        "rev.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.",
        "sept.", "oct.", "nov.", "dec.", "u.s.", "e.g.", "i.e.", "cf.", "al.",
    }
)


class RetrievalConfigError(ValueError):
    """Provider configuration produced unusable embeddings."""


@dataclass
class Sentence:
    sentence_id: int
    raw: str
    rewritten: str | None = None
    embedding: np.ndarray | None = None

    @property
    def retrieval_text(self) -> str:
        return self.rewritten if self.rewritten is not None else self.raw


@dataclass
class DocumentStore:
    """A document as an ordered list of sentences with dense 0..n-1 ids."""

    doc_id: str
    sentences: list[Sentence]

    def __post_init__(self) -> None:
        for i, sentence in enumerate(self.sentences):
            if sentence.sentence_id != i:
                raise ValueError(
                    f"sentence ids must be dense 0..n-1; found {sentence.sentence_id} at {i}"
                )

    @classmethod
    def from_texts(cls, doc_id: str, texts: list[str]) -> DocumentStore:
        return cls(doc_id, [Sentence(i, t) for i, t in enumerate(texts)])

    def __len__(self) -> int:
        return len(self.sentences)


_SPLIT_CANDIDATE = re.compile(r"[.!?]+(?=\s+[A-Z0-9])")
_LAST_TOKEN = re.compile(r"(\S+)$")


def split_sentences(text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Deterministic rule-based sentence segmentation.

    Splits after sentence-final punctuation followed by whitespace and a
    capital letter or digit, except when the preceding token is a protected
    abbreviation or when parentheses opened earlier are still unclosed.
    """
    if not text.strip():
        return []
    cut_points = []
    balance_upto = 0
    balance = 0
    for match in _SPLIT_CANDIDATE.finditer(text):
        end = match.end()
        for ch in text[balance_upto:end]:
            if ch == "(":
                balance += 1
            elif ch == ")":
                balance = max(0, balance - 1)
        balance_upto = end
        if balance > 0:
            continue
        if "." in match.group(0):
            token_match = _LAST_TOKEN.search(text[:end])
            if token_match:
                token = token_match.group(1).lstrip("(\"'[").lower()
                if token in abbreviations:
                    continue
        cut_points.append(end)

    sentences = []
    start = 0
    for cut in cut_points:
        sentences.append(text[start:cut].strip())
        start = cut
    sentences.append(text[start:].strip())
    return [s for s in sentences if s]


@dataclass(frozen=True)
class QuestionRewrite:
    sub_questions: tuple[str, ...]
    degraded: bool = False


def rewrite_question(question: str, rewriter: Rewriter) -> QuestionRewrite:
    """Decompose a question into sub-questions; never fails.

    On provider failure or an empty decomposition the original question is
    the single sub-question and the result is flagged degraded.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    try:
        outputs = [o.strip() for o in rewriter.rewrite("question", question)]
        outputs = [o for o in outputs if o]
    except Exception as exc:
        logger.warning("question rewrite failed, falling back to the original: %s", exc)
        return QuestionRewrite((question,), degraded=True)
    if not outputs:
        logger.warning("question rewrite returned nothing, falling back to the original")
        return QuestionRewrite((question,), degraded=True)
    return QuestionRewrite(tuple(outputs), degraded=False)


def rewrite_sentences(store: DocumentStore, rewriter: Rewriter) -> DocumentStore:
    """Rewrite every sentence into a data-as-subject form.

    Per-sentence provider failures degrade that sentence to its raw text;
    the batch never aborts. Raw text is always kept alongside.
    """
    rewritten: list[Sentence] = []
    failures = 0
    for sentence in store.sentences:
        try:
            outputs = rewriter.rewrite("sentence", sentence.raw)
            text = outputs[0].strip() if outputs and outputs[0].strip() else sentence.raw
        except Exception as exc:
            failures += 1
            logger.warning("sentence %d rewrite failed, keeping raw text: %s", sentence.sentence_id, exc)
            text = sentence.raw
        rewritten.append(Sentence(sentence.sentence_id, sentence.raw, rewritten=text))
    if failures:
        logger.warning("sentence rewriting degraded for %d/%d sentences", failures, len(store))
    return DocumentStore(store.doc_id, rewritten)


@dataclass
class RetrievalRecord:
    """Ranked retrieval output for one question."""

    question: str
    sub_questions: list[str]
    per_question: list[list[tuple[int, float]]]  # ranked (sentence_id, score) per sub-question
    merged: list[tuple[int, float]]  # deduplicated merged ranking, length <= k
    k: int
    degraded: bool = False
    sentence_texts: dict[int, str] = field(default_factory=dict)  # raw text per merged id

    def merged_ids(self) -> list[int]:
        return [sid for sid, _ in self.merged]

    def to_dict(self) -> dict:
        # scores rounded to 12 decimals: stable bytes across BLAS variants
        return {
            "question": self.question,
            "sub_questions": list(self.sub_questions),
            "per_question": [
                [[sid, round(score, 12)] for sid, score in ranked] for ranked in self.per_question
            ],
            "merged": [[sid, round(score, 12)] for sid, score in self.merged],
            "k": self.k,
            "degraded": self.degraded,
            "sentences": [
                {"id": sid, "text": self.sentence_texts[sid]} for sid, _ in self.merged
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> RetrievalRecord:
        return cls(
            question=data["question"],
            sub_questions=list(data["sub_questions"]),
            per_question=[
                [(int(sid), float(score)) for sid, score in ranked]
                for ranked in data["per_question"]
            ],
            merged=[(int(sid), float(score)) for sid, score in data["merged"]],
            k=int(data["k"]),
            degraded=bool(data.get("degraded", False)),
            sentence_texts={int(s["id"]): s["text"] for s in data.get("sentences", [])},
        )


def _ensure_embeddings(store: DocumentStore, embedder) -> np.ndarray:
    missing = [s for s in store.sentences if s.embedding is None]
    if missing:
        vectors = embedder.embed([s.retrieval_text for s in missing])
        for sentence, vector in zip(missing, vectors):
            sentence.embedding = vector
    matrix = np.stack([s.embedding for s in store.sentences])
    return matrix


def merge_round_robin(ranked_lists: list[list[tuple[int, float]]], k: int) -> list[tuple[int, float]]:
    """Interleave per-sub-question rankings, deduplicating by sentence id.

    The interleaving order does not depend on k, so the merged list for a
    larger budget is a prefix extension of the smaller one.
    """
    merged: list[tuple[int, float]] = []
    seen: set[int] = set()
    for rank in range(max((len(r) for r in ranked_lists), default=0)):
        for ranked in ranked_lists:
            if rank < len(ranked):
                sid, score = ranked[rank]
                if sid not in seen:
                    seen.add(sid)
                    merged.append((sid, score))
    return merged[:k]


def merge_max_score(ranked_lists: list[list[tuple[int, float]]], k: int) -> list[tuple[int, float]]:
    """Alternative merge: rank by the best score over all sub-questions."""
    best: dict[int, float] = {}
    for ranked in ranked_lists:
        for sid, score in ranked:
            if sid not in best or score > best[sid]:
                best[sid] = score
    ordered = sorted(best.items(), key=lambda item: (-item[1], item[0]))
    return ordered[:k]


def retrieve_top_k(
    store: DocumentStore,
    sub_questions: list[str],
    embedder,
    k: int = DEFAULT_TOP_K,
    merge: str = "round_robin",
    question: str = "",
    degraded: bool = False,
) -> RetrievalRecord:
    """Rank sentences by cosine against each sub-question and merge top-K."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if merge not in ("round_robin", "max_score"):
        raise ValueError(f"unknown merge strategy: {merge}")
    if not store.sentences:
        logger.warning("retrieval over an empty document store: %s", store.doc_id)
        return RetrievalRecord(question, list(sub_questions), [], [], k, degraded)

    matrix = _ensure_embeddings(store, embedder)
    query_vectors = embedder.embed(list(sub_questions))
    if query_vectors.shape[1] != matrix.shape[1]:
        raise RetrievalConfigError(
            f"embedding dimension mismatch: questions {query_vectors.shape[1]}, "
            f"sentences {matrix.shape[1]}"
        )

    per_question: list[list[tuple[int, float]]] = []
    for q_vec in query_vectors:
        # Quantize to 9 decimals so equal-by-construction scores tie exactly
        # and ordering is bit-stable across numeric backends.
        scores = [round(float(s), 9) for s in matrix @ q_vec]
        order = sorted(range(len(store)), key=lambda i: (-scores[i], i))
        per_question.append([(i, scores[i]) for i in order])

    merge_fn = merge_round_robin if merge == "round_robin" else merge_max_score
    merged = merge_fn(per_question, k)
    texts = {s.sentence_id: s.raw for s in store.sentences}
    record = RetrievalRecord(
        question=question,
        sub_questions=list(sub_questions),
        per_question=per_question,
        merged=merged,
        k=k,
        degraded=degraded,
        sentence_texts={sid: texts[sid] for sid, _ in merged},
    )
    return record


def retrieve_for_question(
    question: str,
    store: DocumentStore,
    rewriter: Rewriter,
    embedder,
    k: int = DEFAULT_TOP_K,
    merge: str = "round_robin",
    rewrite_docs: bool = True,
) -> RetrievalRecord:
    """Full first-stage run: rewrite question and sentences, then retrieve."""
    rewrite = rewrite_question(question, rewriter)
    working = rewrite_sentences(store, rewriter) if rewrite_docs else store
    return retrieve_top_k(
        working,
        list(rewrite.sub_questions),
        embedder,
        k=k,
        merge=merge,
        question=question,
        degraded=rewrite.degraded,
    )
