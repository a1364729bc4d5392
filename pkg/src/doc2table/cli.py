"""Command-line pipeline over the on-disk dataset formats.

Subcommands: annotate, retrieve, generate, evaluate, stats, pipeline.
All outputs are written atomically and deterministically (sorted JSON
keys, input order preserved), so a replayed run reproduces its output
directory byte for byte. Exit codes: 0 success, 1 runtime failure,
2 malformed input; failures print a machine-readable JSON error report
to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import annotate as ann
from . import data
from .config import BuiltProviders, ProviderSpec, RunConfig, build_providers, flush_transcripts
from .generation import GenerationConfig, StageFailure, run_tabtalk, trace_to_dict
from .html_io import parse_html_table, serialize_html
from .metrics import aggregate_scores, recall_at_k, table_scores
from .providers import ProviderError
from .retrieval import DocumentStore, retrieve_top_k, rewrite_question, rewrite_sentences

logger = logging.getLogger(__name__)

RECALL_KS = (10, 20, 30)


def _provider_spec(role: str, value: str) -> ProviderSpec:
    """Parse compact CLI provider specs: mode[:arg].

    Examples: ``hashing``, ``identity``, ``replay:transcripts/chat.jsonl``,
    ``live:https://api.example.com/v1/chat``,
    ``record:transcripts/new.jsonl@https://api.example.com/v1/chat``.
    """
    mode, _, arg = value.partition(":")
    if mode == "replay":
        return ProviderSpec(mode="replay", transcript=arg)
    if mode == "live":
        return ProviderSpec(mode="live", endpoint=arg)
    if mode == "record":
        transcript, _, endpoint = arg.partition("@")
        return ProviderSpec(mode="record", transcript=transcript, endpoint=endpoint)
    if mode in ("hashing", "identity"):
        return ProviderSpec(mode=mode)
    raise ValueError(f"unknown {role} provider spec {value!r}")


def _rewritten_stores(
    documents: dict[str, DocumentStore], built: BuiltProviders, rewrite_docs: bool
) -> dict[str, DocumentStore]:
    if not rewrite_docs:
        return documents
    return {
        doc_id: rewrite_sentences(store, built.rewriter)
        for doc_id, store in documents.items()
    }


def _retrieve_all(
    triples: list[ann.QaTriple],
    documents: dict[str, DocumentStore],
    built: BuiltProviders,
    k: int,
    merge: str,
    rewrite_docs: bool,
) -> list[tuple[ann.QaTriple, dict]]:
    stores = _rewritten_stores(documents, built, rewrite_docs)
    out = []
    for triple in triples:
        if triple.doc_id not in stores:
            raise data.InputFormatError(
                "<triples>", 0, "doc_id", f"unknown doc_id {triple.doc_id!r}"
            )
        rewrite = rewrite_question(triple.question, built.rewriter)
        record = retrieve_top_k(
            stores[triple.doc_id],
            list(rewrite.sub_questions),
            built.embedder,
            k=k,
            merge=merge,
            question=triple.question,
            degraded=rewrite.degraded,
        )
        out.append((triple, record.to_dict()))
    return out


def _recall_rows(triples, records_by_id, ks) -> tuple[list[dict], dict]:
    rows = []
    for triple in triples:
        if not triple.relevant_sentence_ids or triple.triple_id not in records_by_id:
            continue
        record = records_by_id[triple.triple_id]
        ranked = record.merged_ids() if hasattr(record, "merged_ids") else [
            sid for sid, _ in record["merged"]
        ]
        rows.append(
            {
                "id": triple.triple_id,
                "recall_at_k": {
                    str(k): recall_at_k(ranked, triple.relevant_sentence_ids, k) for k in ks
                },
            }
        )
    if not rows:
        return rows, {}
    means = {
        str(k): sum(r["recall_at_k"][str(k)] for r in rows) / len(rows) for k in ks
    }
    return rows, means


def cmd_annotate(args) -> int:
    documents = data.read_documents(args.docs)
    tables = data.read_tables(args.tables)
    decisions = data.read_review(args.review) if args.review else {}

    annotated = []
    for record in tables:
        if record["doc_id"] not in documents:
            raise data.InputFormatError(
                args.tables, 0, "doc_id", f"unknown doc_id {record['doc_id']!r}"
            )
        table = parse_html_table(record["table_html"])
        matches = ann.match_cells_to_sentences(table, documents[record["doc_id"]])
        ann.apply_review(matches, decisions.get(record["table_id"], {}))
        annotated.append((record, table, matches))

    triples_out = []
    matches_out = []
    exclusions_out = []
    for record, table, matches in annotated:
        coverage = ann.coverage_ratio(table, matches)
        matches_out.append(
            {
                "table_id": record["table_id"],
                "coverage": coverage,
                "matches": [
                    {
                        "match_id": m.match_id,
                        "row": m.row,
                        "col": m.col,
                        "kind": m.kind,
                        "sentence_ids": list(m.sentence_ids),
                        "matched_token": m.matched_token,
                        "sign_flip_ids": list(m.sign_flip_ids),
                        "status": m.status,
                    }
                    for m in matches
                ],
            }
        )
        if ann.is_excluded(table, matches):
            exclusions_out.append(
                {"table_id": record["table_id"], "coverage": coverage, "uncovered": 1.0 - coverage}
            )
        else:
            triples_out.append(
                {
                    "id": record["table_id"],
                    "doc_id": record["doc_id"],
                    "question": record["question"],
                    "table_html": serialize_html(table),
                    "relevant_sentence_ids": list(ann.relevant_ids(matches)),
                }
            )

    out = Path(args.out)
    data.write_jsonl(out / "triples.jsonl", triples_out)
    data.write_jsonl(out / "matches.jsonl", matches_out)
    data.write_jsonl(out / "exclusions.jsonl", exclusions_out)
    print(f"retained {len(triples_out)} tables, excluded {len(exclusions_out)}")
    return 0


def cmd_retrieve(args) -> int:
    triples = data.read_triples(args.triples)
    documents = data.read_documents(args.docs)
    config = RunConfig(
        rewriter=_provider_spec("rewriter", args.rewriter),
        embedder=_provider_spec("embedder", args.embedder),
        k=args.k,
        merge=args.merge,
    )
    built = build_providers(config, roles=("rewriter", "embedder"))

    results = _retrieve_all(triples, documents, built, args.k, args.merge, not args.no_rewrite)
    out = Path(args.out)
    data.write_jsonl(
        out / "retrieval.jsonl",
        [{"id": t.triple_id, **record} for t, record in results],
    )

    ks = [k for k in RECALL_KS if k <= args.k] or [args.k]
    records_by_id = {t.triple_id: record for t, record in results}
    rows, means = _recall_rows(triples, records_by_id, ks)
    if rows:
        data.write_json(out / "recall.json", {"per_item": rows, "mean": means})
        print("recall " + "  ".join(f"@{k}={means[str(k)]:.4f}" for k in ks))
    flush_transcripts(built)
    print(f"retrieved for {len(results)} questions")
    return 0


def _generation_config(args_or_config) -> GenerationConfig:
    if isinstance(args_or_config, RunConfig):
        return GenerationConfig(
            fill_batch_size=args_or_config.fill_batch_size,
            max_retries=args_or_config.max_retries,
            oneshot=args_or_config.oneshot,
            parallel_fill=args_or_config.parallel,
        )
    return GenerationConfig(
        fill_batch_size=args_or_config.batch_size,
        max_retries=args_or_config.max_retries,
        oneshot=args_or_config.baseline_oneshot,
    )


def _generate_all(triples, records_by_id, chat, gen_config):
    tables_out = []
    traces_out = []
    errors_out = []
    generated = {}
    for triple in triples:
        record = records_by_id.get(triple.triple_id)
        if record is None:
            errors_out.append(
                {"id": triple.triple_id, "stage": "input", "error": "no retrieval record"}
            )
            continue
        sentences = [(sid, record.sentence_texts[sid]) for sid in record.merged_ids()]
        try:
            result = run_tabtalk(triple.question, sentences, chat, gen_config)
        except StageFailure as exc:
            errors_out.append({"id": triple.triple_id, "stage": exc.stage, "error": str(exc)})
            continue
        generated[triple.triple_id] = result.table
        tables_out.append({"id": triple.triple_id, "table_html": serialize_html(result.table)})
        traces_out.append(
            {
                "id": triple.triple_id,
                "structure_retries": result.structure_retries,
                "fill_retries": result.fill_retries,
                **trace_to_dict(result.plan, result.trace),
            }
        )
    return generated, tables_out, traces_out, errors_out


def cmd_generate(args) -> int:
    triples = data.read_triples(args.triples)
    records_by_id = data.read_retrieval_records(args.retrieval)
    config = RunConfig(chat=_provider_spec("llm", args.llm))
    built = build_providers(config, roles=("chat",))

    _, tables_out, traces_out, errors_out = _generate_all(
        triples, records_by_id, built.chat, _generation_config(args)
    )
    out = Path(args.out)
    data.write_jsonl(out / "tables.jsonl", tables_out)
    data.write_jsonl(out / "traces.jsonl", traces_out)
    if errors_out:
        data.write_jsonl(out / "errors.jsonl", errors_out)
    flush_transcripts(built)
    print(f"generated {len(tables_out)} tables, {len(errors_out)} failures")
    return 0 if not errors_out else 1


def _summary_table(items: list[dict], aggregate: dict) -> str:
    columns = [
        ("id", lambda row: row["id"]),
        ("TEDS", lambda row: f"{row['teds']:.4f}"),
        ("Body-P", lambda row: f"{row['content_precision']:.4f}"),
        ("Body-R", lambda row: f"{row['content_recall']:.4f}"),
        ("Body-F1", lambda row: f"{row['content_f1']:.4f}"),
        ("R-Header-F1", lambda row: f"{row['header_f1']['left']:.4f}"),
        ("C-Header-F1", lambda row: f"{row['header_f1']['top']:.4f}"),
    ]
    rows = [[name for name, _ in columns]]
    for item in items:
        rows.append([fmt(item) for _, fmt in columns])
    if aggregate:
        rows.append([fmt({**aggregate, "id": "mean"}) for _, fmt in columns])
    widths = [max(len(row[i]) for row in rows) for i in range(len(columns))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    if aggregate:
        lines.insert(-1, "-" * len(lines[0]))
    return "\n".join(lines)


def _evaluate_items(
    generated: dict[str, "object"],
    groundtruth: dict[str, ann.QaTriple],
    recall_rows: dict[str, dict] | None = None,
) -> tuple[list[dict], dict]:
    items = []
    for item_id in generated:
        if item_id not in groundtruth:
            continue
        scores = table_scores(generated[item_id], groundtruth[item_id].table)
        entry = {"id": item_id, **scores}
        if recall_rows and item_id in recall_rows:
            entry["recall_at_k"] = recall_rows[item_id]
        items.append(entry)
    return items, aggregate_scores([{k: v for k, v in i.items() if k != "id"} for i in items])


def cmd_evaluate(args) -> int:
    generated_html = data.read_generated_tables(args.generated)
    groundtruth = {t.triple_id: t for t in data.read_triples(args.groundtruth)}
    missing = sorted(set(generated_html) - set(groundtruth))
    if missing:
        raise data.InputFormatError(args.generated, 0, "id", f"no ground truth for ids {missing}")
    generated = {item_id: parse_html_table(html) for item_id, html in generated_html.items()}

    items, aggregate = _evaluate_items(generated, groundtruth)
    out = Path(args.out)
    data.write_jsonl(out / "evaluation.jsonl", items)
    data.write_json(out / "evaluation.json", aggregate)
    print(_summary_table(items, aggregate))
    return 0


def cmd_stats(args) -> int:
    triples = data.read_triples(args.triples)
    documents = data.read_documents(args.docs) if args.docs else None
    stats = ann.corpus_stats(triples, documents)
    print(json.dumps(stats.to_dict(), sort_keys=True, indent=2))
    return 0


def cmd_pipeline(args) -> int:
    config = RunConfig.from_file(args.config)
    out = Path(args.out) if args.out else Path(config.out_dir)
    documents = data.read_documents(config.docs)
    triples = data.read_triples(config.questions)
    built = build_providers(config)

    results = _retrieve_all(triples, documents, built, config.k, config.merge, config.rewrite_docs)
    data.write_jsonl(
        out / "retrieval.jsonl", [{"id": t.triple_id, **record} for t, record in results]
    )

    from .retrieval import RetrievalRecord

    records_by_id = {t.triple_id: RetrievalRecord.from_dict(r) for t, r in results}
    generated, tables_out, traces_out, errors_out = _generate_all(
        triples, records_by_id, built.chat, _generation_config(config)
    )
    data.write_jsonl(out / "tables.jsonl", tables_out)
    data.write_jsonl(out / "traces.jsonl", traces_out)
    if errors_out:
        data.write_jsonl(out / "errors.jsonl", errors_out)

    ks = [k for k in RECALL_KS if k <= config.k] or [config.k]
    recall_items, recall_means = _recall_rows(triples, records_by_id, ks)
    if recall_items:
        data.write_json(out / "recall.json", {"per_item": recall_items, "mean": recall_means})

    recall_by_id = {r["id"]: r["recall_at_k"] for r in recall_items}
    groundtruth = {t.triple_id: t for t in triples}
    items, aggregate = _evaluate_items(generated, groundtruth, recall_by_id)
    if items:
        data.write_jsonl(out / "evaluation.jsonl", items)
        data.write_json(out / "evaluation.json", aggregate)
        summary = _summary_table(items, aggregate)
        data.atomic_write_text(out / "summary.txt", summary + "\n")
        print(summary)

    flush_transcripts(built)
    print(f"pipeline complete: {len(tables_out)} tables, {len(errors_out)} failures -> {out}")
    return 0 if not errors_out else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doc2table",
        description="Answer questions over documents with hierarchical tables.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="match table cells to sentences and filter")
    p.add_argument("--docs", required=True)
    p.add_argument("--tables", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--review", default="", help="JSONL of review decisions")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("retrieve", help="rank relevant sentences per question")
    p.add_argument("--triples", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--embedder", default="hashing")
    p.add_argument("--rewriter", default="identity")
    p.add_argument("--merge", default="round_robin", choices=["round_robin", "max_score"])
    p.add_argument("--no-rewrite", action="store_true", help="skip document sentence rewriting")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("generate", help="generate tables from retrieved sentences")
    p.add_argument("--triples", required=True)
    p.add_argument("--retrieval", required=True)
    p.add_argument("--llm", required=True)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-retries", type=int, default=1)
    p.add_argument("--baseline-oneshot", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generated tables against ground truth")
    p.add_argument("--generated", required=True)
    p.add_argument("--groundtruth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="corpus statistics over a triples file")
    p.add_argument("--triples", required=True)
    p.add_argument("--docs", default="", help="documents file for token statistics")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pipeline", help="end-to-end run from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="", help="override the configured output directory")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except data.InputFormatError as exc:
        print(json.dumps({"error": exc.to_dict()}, sort_keys=True), file=sys.stderr)
        return 2
    except (ValueError, OSError, ProviderError) as exc:
        report = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
