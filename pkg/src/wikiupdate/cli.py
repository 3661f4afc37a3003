"""Command line entry point.

Exit codes: 0 success, 1 data or contract violation, 2 environment/IO error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import multiprocessing
import sys
from pathlib import Path

from wikiupdate import baselines, codec, pipeline
from wikiupdate.annotators import AnnotationError, make_annotator
from wikiupdate.corpus import CorpusError, dumps, write_corpus
from wikiupdate.evaluate import EvaluationError, agreement, evaluate
from wikiupdate.metrics import spearman
from wikiupdate.models import SchemaError, article_to_dict
from wikiupdate.text import normalize_title
from wikiupdate.wikitext import MalformedMarkup, parse_wikitext_subset

logger = logging.getLogger("wikiupdate")

WIKITEXT_SUFFIXES = (".wiki", ".wikitext", ".txt")


class DataError(Exception):
    """Maps to exit status 1."""


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n")


def _read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise DataError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
    return out


def _read_instances(path) -> list:
    try:
        return list(pipeline.read_instances(path))
    except (KeyError, ValueError, TypeError) as e:
        raise DataError(f"{path}: malformed instance record ({e!r})") from e


# --- ingest --------------------------------------------------------------------


def _ingest_one(job):
    path, page_id, date = job
    try:
        raw = Path(path).read_text(encoding="utf-8")
        return article_to_dict(parse_wikitext_subset(raw, page_id, page_id, date)), None
    except MalformedMarkup as e:
        return None, str(e)
    except UnicodeDecodeError as e:
        return None, f"{page_id}: not UTF-8 ({e.reason})"


def cmd_ingest(args) -> int:
    src = Path(args.wikitext)
    if not src.is_dir():
        raise OSError(f"not a directory: {src}")
    date = datetime.date.fromisoformat(args.date)
    files = [p for p in src.iterdir() if p.suffix in WIKITEXT_SUFFIXES and p.is_file()]
    jobs = sorted(((str(p), normalize_title(p.stem), date) for p in files), key=lambda j: (j[1], j[0]))
    pages = rejected = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as out:
        if args.workers > 1:
            pool = multiprocessing.get_context("fork").Pool(args.workers)
            results = pool.imap(_ingest_one, jobs, chunksize=64)
        else:
            pool = None
            results = map(_ingest_one, jobs)
        try:
            for record, error in results:
                pages += 1
                if error is not None:
                    rejected += 1
                    logger.error("rejected page %s", error)
                    continue
                out.write(dumps(record) + "\n")
        finally:
            if pool is not None:
                pool.close()
                pool.join()
    print(f"pages={pages} rejected={rejected}")
    if not args.lenient and pages and rejected / pages > pipeline.FAILURE_BUDGET:
        return 1
    return 0


# --- build ---------------------------------------------------------------------


def cmd_build(args) -> int:
    for p in (args.source, args.target):
        if not Path(p).exists():
            raise OSError(f"no such file: {p}")
    result = pipeline.build_from_files(args.source, args.target, workers=args.workers)
    pipeline.write_instances(result.instances, args.out)
    st = pipeline.stats(result.instances)
    removed = sum(len(i.removed_source) for i in result.instances)
    logger.info("removed source sentences (not counted as edits): %d", removed)
    if args.stats:
        doc = st.to_dict()
        doc["config"] = {"source": str(args.source), "target": str(args.target), "out": str(args.out)}
        doc["pages"] = result.pages
        doc["failed_pages"] = len(result.failures)
        _write_json(args.stats, doc)
    print(
        f"pages={result.pages} failed={len(result.failures)} instances={st.articles} "
        f"edits={st.edits} substantiated={st.substantiated_edits} evidence={st.evidence_items} "
        f"content_selection={st.content_selection_instances}"
    )
    return 1 if result.over_budget else 0


# --- encode / decode -----------------------------------------------------------


def cmd_encode(args) -> int:
    instances = _read_instances(args.instances)
    inputs_path, targets_path = args.out
    with open(inputs_path, "w", encoding="utf-8", newline="\n") as fi, open(
        targets_path, "w", encoding="utf-8", newline="\n"
    ) as ft:
        for inst in instances:
            plan = codec.plan_from_target(inst) if args.control == "oracle" else None
            fi.write(codec.serialize_input(inst, include_evidence=args.evidence, control=plan) + "\n")
            if args.mode == "edit":
                ft.write(codec.encode_target(inst).render() + "\n")
            else:
                ft.write(" ".join(inst.target_texts) + "\n")
    return 0


def cmd_decode(args) -> int:
    instances = _read_instances(args.instances)
    with open(args.outputs, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if len(lines) != len(instances):
        raise DataError(f"{args.outputs}: {len(lines)} lines for {len(instances)} instances")
    with open(args.out, "w", encoding="utf-8", newline="\n") as out:
        for inst, line in zip(instances, lines):
            if args.keep_format:
                rec = {"instance_id": inst.instance_id, "output": line, "format": "edit_script"}
            else:
                decoded = codec.decode_output(line, inst.source_texts)
                for w in decoded.warnings:
                    logger.warning("%s: %s", inst.instance_id, w)
                rec = {"instance_id": inst.instance_id, "output": " ".join(decoded.sentences), "format": "plain"}
            out.write(dumps(rec) + "\n")
    return 0


# --- evaluate / baseline / agreement / correlate ----------------------------------


def cmd_evaluate(args) -> int:
    instances = _read_instances(args.instances)
    predictions = _read_jsonl(args.predictions)
    annotator = make_annotator(args.annotator)
    config = {"instances": str(args.instances), "predictions": str(args.predictions), "annotator_spec": args.annotator}
    report = evaluate(instances, predictions, annotator, workers=args.workers, config=config)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_json())
    print(report.table())
    return 0


def cmd_baseline(args) -> int:
    instances = _read_instances(args.instances)
    with open(args.out, "w", encoding="utf-8", newline="\n") as out:
        for rec in baselines.predictions(instances, args.kind):
            out.write(dumps(rec) + "\n")
    return 0


def cmd_agreement(args) -> int:
    silver = _read_instances(args.silver)
    gold = _read_instances(args.gold)
    report = agreement(silver, gold, make_annotator(args.annotator))
    print(report.table())
    print(f"reference_agreement {report.extra['reference_agreement']:.1f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_json())
    return 0


CORRELATED = (
    "update_rouge1",
    "update_rouge2",
    "update_rougeL",
    "entity_precision",
    "entity_recall",
    "unsupported_entity_tokens",
)


def correlate(reports_a: list[dict], reports_b: list[dict]) -> dict[str, float]:
    """Spearman rho (x100) per metric between two systems-by-metric tables."""
    if len(reports_a) != len(reports_b):
        raise DataError(f"{len(reports_a)} reports vs {len(reports_b)}: systems must pair up")
    if len(reports_a) < 2:
        raise DataError("need at least two systems to rank")
    out = {}
    for key in CORRELATED:
        xs = [r[key] for r in reports_a]
        ys = [r[key] for r in reports_b]
        out[key] = 100.0 * spearman(xs, ys)
    return out


def cmd_correlate(args) -> int:
    def load(paths):
        reports = []
        for p in paths:
            with open(p, encoding="utf-8") as fh:
                reports.append(json.load(fh))
        return reports

    rhos = correlate(load(args.report_a), load(args.report_b))
    for key, rho in rhos.items():
        print(f"{key}\t{rho:.1f}")
    return 0


# --- wiring ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wikiupdate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a directory of wikitext pages into a corpus file")
    p.add_argument("--wikitext", required=True, help="directory of <Title>.wiki files")
    p.add_argument("--date", required=True, help="snapshot date, YYYY-MM-DD")
    p.add_argument("--out", required=True)
    p.add_argument("--lenient", action="store_true", help="exit 0 even if more than 1%% of pages are rejected")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="build update instances from a snapshot pair")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("encode", help="write model input and target line files")
    p.add_argument("--instances", required=True)
    p.add_argument("--mode", choices=("plain", "edit"), default="edit")
    p.add_argument("--evidence", action="store_true", help="append the [CONTEXT] evidence block")
    p.add_argument("--control", choices=("none", "oracle"), default="none")
    p.add_argument("--out", nargs=2, required=True, metavar=("INPUTS", "TARGETS"))
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="turn edit-script output lines into a prediction file")
    p.add_argument("--instances", required=True)
    p.add_argument("--outputs", required=True, help="one model output per line, in instance order")
    p.add_argument("--out", required=True)
    p.add_argument("--keep-format", action="store_true", help="store raw edit scripts (format=edit_script)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="score predictions")
    p.add_argument("--instances", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--annotator", default="gazetteer", help="gazetteer, identity or file:PATH")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="write copy-baseline predictions")
    p.add_argument("--instances", required=True)
    p.add_argument("--kind", choices=sorted(baselines.BASELINES), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("agreement", help="silver vs gold agreement (gold is the reference)")
    p.add_argument("--silver", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--annotator", default="gazetteer")
    p.add_argument("--out")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("correlate", help="Spearman rank correlation of systems across two report sets")
    p.add_argument("--report-a", nargs="+", required=True, help="one report per system")
    p.add_argument("--report-b", nargs="+", required=True, help="same systems, same order")
    p.set_defaults(func=cmd_correlate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DataError, EvaluationError, AnnotationError, CorpusError, SchemaError, codec.ControlPlanError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, UnicodeDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
