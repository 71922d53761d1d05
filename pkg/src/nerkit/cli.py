"""Command-line entry point: ``nerkit run|serve|eval|report|validate``.

Exit codes: 0 success, 1 validation or evaluation failure, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from urllib.parse import unquote, urlsplit

from .errors import BindError, ConfigError, IoError, NerkitError, SinkError, SourceError
from .ingestion import load_extracted_record, load_plain_text
from .model import EntityMention, StoreConnection, default_registry, load_settings, validate_mention
from .results import DocumentResult, RunStatistics

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("nerkit")


def _err(msg: str):
    print(f"nerkit: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    from .pipeline import execute_run

    path = Path(args.settings)
    try:
        settings = load_settings(path)
    except OSError as exc:
        _err(f"cannot read settings {path}: {exc.strerror or exc}")
        return EXIT_IO
    locations, stats = execute_run(settings, workers=args.workers)
    print(f"processed {stats.documents} documents; {len(locations)} results written")
    for model_id, s in stats.models.items():
        print(f"  {model_id}: {s.entities} mentions, {s.failures} failures, "
              f"{s.total_exec_time_s:.2f} s")
    return EXIT_OK


def parse_results_source(source: str):
    """A results directory, or ``http(s)://host[:port]/<database>`` for a store."""
    if source.startswith(("http://", "https://")):
        parts = urlsplit(source)
        db = unquote(parts.path.strip("/"))
        if not db or "/" in db:
            raise ConfigError(f"store url must name exactly one database: {source!r}")
        return StoreConnection(f"{parts.scheme}://{parts.netloc}", db)
    return Path(source)


def _parse_pairs(items, what: str) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key or not value:
            raise ConfigError(f"{what} must look like key=value, got {item!r}")
        out[key] = value
    return out


def cmd_serve(args) -> int:
    from .api import serve

    source = parse_results_source(args.source)
    nlp = _parse_pairs(args.nlp, "--nlp")
    print(f"serving {args.source} on http://{args.host}:{args.port}")
    serve(source, nlp, args.host, args.port)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .bench import GOLD_ORACLE_ID, evaluate_corpus, gold_oracle_backend, load_conll
    from .adapters import run_external_backend
    from .recognizers.backends import Resources, check_native, run_native_backend
    from .recognizers.gazetteer import load_gazetteers

    corpus = load_conll(args.conll, strict=args.strict)
    endpoints = {args.model: args.endpoint} if args.endpoint else {}
    registry = default_registry(endpoints=endpoints)
    oracle = gold_oracle_backend(corpus)
    registry[GOLD_ORACLE_ID] = oracle.descriptor
    desc = registry.get(args.model)
    if desc is None:
        raise ConfigError(f"unknown model id {args.model!r}")
    resources = Resources(backends={GOLD_ORACLE_ID: oracle})
    if desc.kind == "native":
        if args.model in ("native/gazetteer", "native/combined"):
            resources = Resources(load_gazetteers(args.gazetteer or ["builtin"]), resources.backends)
        check_native(args.model, resources)

    predictions = {}
    failures = 0
    for doc in corpus.records():
        if desc.kind == "native":
            r = run_native_backend(args.model, doc, resources)
        else:
            r = run_external_backend(desc, doc, retries=args.retries)
        if r.error:
            failures += 1
            log.warning("%s failed on %s: %s", args.model, doc.doc_id, r.error)
        predictions[doc.doc_id] = r.entities
    report = evaluate_corpus(corpus, predictions)
    print(f"{args.model} on {Path(args.conll).name}: {len(corpus.documents)} documents")
    print(report.format())
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    if failures:
        _err(f"{failures} documents failed")
        return EXIT_FAIL
    return EXIT_OK


def cmd_report(args) -> int:
    from .bench import report_table

    path = Path(args.stats)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        _err(f"cannot read {path}: {exc.strerror or exc}")
        return EXIT_IO
    except ValueError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    dataset = args.dataset or path.resolve().parent.name
    sys.stdout.write(report_table(RunStatistics.from_dict(data), dataset))
    return EXIT_OK


def _source_text(result: DocumentResult):
    """Original text for a result, when its source is a readable local file."""
    uri = urlsplit(result.source_uri)
    if uri.scheme != "file":
        return None
    path = Path(unquote(uri.path))
    if not path.is_file():
        return None
    loader = load_extracted_record if path.suffix.lower() == ".json" else load_plain_text
    try:
        return loader(path).text
    except NerkitError:
        return None


def textless_violations(m: EntityMention) -> list:
    """The checks that need no document text; span length stands in for the slice."""
    problems = []
    if m.start < 0:
        problems.append("start is negative")
    if m.end <= m.start:
        problems.append("empty or inverted span")
    if len(m.surface) != m.end - m.start:
        problems.append("surface length differs from span")
    if m.surface not in m.context:
        problems.append("context does not contain surface")
    if m.score is not None and not 0.0 <= m.score <= 1.0:
        problems.append("score outside [0, 1]")
    return problems


def validate_result(result: DocumentResult, text=None) -> list:
    """``(model_id, mention, violation)`` for every problem found."""
    out = []
    for m in result.mentions():
        problems = validate_mention(text, m).violations if text is not None else textless_violations(m)
        out.extend((m.model_id, m, p) for p in problems)
    return out


def cmd_validate(args) -> int:
    path = Path(args.result)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        _err(f"cannot read: {exc.strerror or exc}")
        return EXIT_IO
    except ValueError as exc:
        _err(f"{path} is not valid JSON: {exc}")
        return EXIT_FAIL
    try:
        result = DocumentResult.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        _err(f"{path} is not a result document: {exc!r}")
        return EXIT_FAIL
    text = load_plain_text(args.text).text if args.text else _source_text(result)
    problems = validate_result(result, text)
    for model_id, m, p in problems:
        print(f"{model_id} ({m.start}, {m.end}) {m.surface!r}: {p}")
    n = sum(1 for _ in result.mentions())
    mode = "against source text" if text is not None else "without source text"
    print(f"{n} mentions checked {mode}; {len(problems)} violations")
    return EXIT_FAIL if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nerkit", description="Multi-backend named entity recognition.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a run from a settings file")
    r.add_argument("settings")
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("serve", help="serve the results API")
    s.add_argument("source", help="results directory or http(s)://host:port/<database>")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--nlp", action="append", metavar="TASK=URL",
                   help="proxy target for pos, depparse or coref (repeatable)")
    s.set_defaults(func=cmd_serve)

    e = sub.add_parser("eval", help="score a model against a CoNLL-2003 file")
    e.add_argument("conll")
    e.add_argument("--model", required=True)
    e.add_argument("--endpoint", help="server URL for an external model")
    e.add_argument("--gazetteer", action="append", help="gazetteer TSV (repeatable; default builtin)")
    e.add_argument("--retries", type=int, default=3, help="retries per request for external models")
    e.add_argument("--strict", action="store_true", help="reject malformed IOB sequences")
    e.add_argument("--json", help="also write the scores as JSON to this path")
    e.set_defaults(func=cmd_eval)

    rep = sub.add_parser("report", help="render run statistics as a table")
    rep.add_argument("stats")
    rep.add_argument("--dataset", help="dataset column value (default: the stats file's folder)")
    rep.set_defaults(func=cmd_report)

    v = sub.add_parser("validate", help="check every mention of a result file")
    v.add_argument("result")
    v.add_argument("--text", help="source text file (default: the result's source_uri if local)")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IoError, SinkError, BindError, SourceError) as exc:
        _err(str(exc))
        return EXIT_IO
    except ConfigError as exc:
        _err(f"configuration error: {exc}")
        return EXIT_CONFIG
    except NerkitError as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
