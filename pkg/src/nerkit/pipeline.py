"""Run settings end to end: acquire documents, run blocks, persist results."""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Optional

from .adapters import run_external_backend
from .errors import (ConfigError, IoError, MissingContent, NerkitError, NotFound,
                     SinkError, TransportError)
from .ingestion import (DocumentRecord, load_extracted_record, load_plain_text, scan_input,
                        store_ensure_database, store_get, store_list, store_put, store_revision)
from .model import (ContextPolicy, DirectoryOutput, FilesInput, ModelDescriptor, ProcessingBlock,
                    RunSettings, StoreConnection, StoreInput, StoreOutput, default_registry,
                    fingerprint_settings)
from .recognizers.backends import Resources, check_native, run_native_backend
from .recognizers.gazetteer import load_gazetteers
from .results import (DocumentResult, ModelRunResult, ModelStats, RunStatistics,
                      accumulate_stats, build_summary)
from .textkit import ContextExtractor

log = logging.getLogger(__name__)

RESULT_SUFFIX = ".result.json"
RESULT_PREFIX = "result::"
STATS_FILE = "run_stats.json"
STATS_DOC = "run_stats"

FORMAT_EXTENSIONS = {"text": {"txt"}, "record": {"json"}, "auto": {"txt", "json"}}


def run_block(block: ProcessingBlock, doc: DocumentRecord, registry: Mapping[str, ModelDescriptor],
              resources: Optional[Resources] = None, *, policy: Optional[ContextPolicy] = None,
              strict_labels: bool = False, context: Optional[ContextExtractor] = None) -> list:
    """Run the block's models over ``doc`` strictly in declared order."""
    resources = resources or Resources()
    context = context or ContextExtractor(doc.text, policy)
    results = []
    for model_id in block.model_ids:
        desc = registry[model_id]
        if desc.kind == "native":
            try:
                r = run_native_backend(model_id, doc, resources, context=context)
            except NerkitError as exc:
                r = ModelRunResult(model_id, 0.0, (), f"{type(exc).__name__}: {exc}")
        else:
            r = run_external_backend(desc, doc, strict_labels=strict_labels, context=context,
                                     timeout=resources.timeout, retries=resources.retries,
                                     transport=resources.transport, sleep=resources.sleep,
                                     token=resources.token)
        if r.error:
            log.warning("%s failed on %s: %s", model_id, doc.doc_id, r.error)
        results.append(r)
    return results


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def process_document(doc: DocumentRecord, settings: RunSettings, registry, resources,
                     fingerprint: str) -> DocumentResult:
    context = ContextExtractor(doc.text, settings.context_policy)
    model_results = []
    for block in settings.blocks:
        model_results.extend(run_block(block, doc, registry, resources, strict_labels=settings.strict_labels,
                                       context=context))
    return DocumentResult(doc.doc_id, doc.source_uri, fingerprint, now_utc(),
                          tuple(model_results), build_summary(model_results))


# -- sinks --------------------------------------------------------------------

_UNSAFE = re.compile(r"[^\w.:@+=-]")


def result_filename(doc_id: str) -> str:
    name = _UNSAFE.sub("_", doc_id).replace(":", "_")
    if name.startswith("."):
        name = "_" + name
    return name + RESULT_SUFFIX


def _atomic_write(path: Path, data: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise SinkError(f"cannot write {path}: {exc}") from exc


def _store_upsert(conn: StoreConnection, doc_id: str, payload: dict) -> str:
    try:
        return store_put(conn, doc_id, payload, store_revision(conn, doc_id))
    except NerkitError as exc:
        raise SinkError(f"cannot store {doc_id}: {exc}") from exc


def write_result(sink, r: DocumentResult) -> str:
    """Persist one result; returns the file path or store document id."""
    if isinstance(sink, DirectoryOutput):
        path = Path(sink.path) / result_filename(r.doc_id)
        _atomic_write(path, r.to_json())
        return str(path)
    if isinstance(sink, StoreOutput):
        sid = RESULT_PREFIX + r.doc_id
        _store_upsert(sink.connection, sid, r.to_dict())
        return sid
    raise ConfigError(f"unsupported sink {sink!r}")


def write_stats(sink, stats: RunStatistics) -> str:
    if isinstance(sink, DirectoryOutput):
        path = Path(sink.path) / STATS_FILE
        _atomic_write(path, stats.to_json())
        return str(path)
    _store_upsert(sink.connection, STATS_DOC, stats.to_dict())
    return STATS_DOC


def read_result(path) -> DocumentResult:
    with open(path, encoding="utf-8") as fh:
        return DocumentResult.from_dict(json.load(fh))


# -- document acquisition ------------------------------------------------------

def _resolve_sink(settings: RunSettings):
    out = settings.output
    if isinstance(out, DirectoryOutput):
        return DirectoryOutput(str(settings.resolve(out.path)))
    return out


def _load_file(path: Path, fmt: str, root: Path) -> DocumentRecord:
    if fmt == "record" or (fmt == "auto" and path.suffix.lower() == ".json"):
        return load_extracted_record(path, root)
    return load_plain_text(path, root)


def acquire_documents(settings: RunSettings) -> tuple:
    """Load all input documents. Returns ``(documents, skipped)``.

    Unreadable inputs and duplicate doc ids raise ConfigError; individual
    documents that fail to decode or parse are skipped and reported.
    """
    docs, skipped = [], []
    inp = settings.input
    if isinstance(inp, FilesInput):
        for raw in inp.paths:
            p = settings.resolve(raw)
            if p.is_dir():
                files = scan_input(p, FORMAT_EXTENSIONS[inp.format])
                root = p
            elif p.is_file():
                files, root = [p], p.parent
            else:
                raise ConfigError(f"input path not found: {p}")
            for f in files:
                try:
                    docs.append(_load_file(f, inp.format, root))
                except IoError as exc:
                    raise ConfigError(str(exc)) from exc
                except NerkitError as exc:
                    log.warning("skipping %s: %s", f, exc)
                    skipped.append((str(f), str(exc)))
    elif isinstance(inp, StoreInput):
        conn = inp.connection
        try:
            ids = store_list(conn)
        except (TransportError, NotFound) as exc:
            raise ConfigError(f"cannot read input store: {exc}") from exc
        for doc_id in ids:
            if doc_id.startswith((RESULT_PREFIX, "_")) or doc_id == STATS_DOC:
                continue
            try:
                docs.append(store_get(conn, doc_id))
            except (MissingContent, NerkitError) as exc:
                log.warning("skipping store doc %s: %s", doc_id, exc)
                skipped.append((doc_id, str(exc)))
    else:
        raise ConfigError(f"unsupported input {inp!r}")
    seen = set()
    for d in docs:
        if d.doc_id in seen:
            raise ConfigError(f"duplicate doc_id in run: {d.doc_id!r}")
        seen.add(d.doc_id)
    return docs, skipped


def prepare_resources(settings: RunSettings, registry, resources: Optional[Resources]) -> Resources:
    resources = resources if resources is not None else Resources()
    needed = settings.model_ids
    natives = [m for m in needed if registry[m].kind == "native"]
    if not resources.gazetteers and any(m in ("native/gazetteer", "native/combined") for m in natives):
        resources = replace(resources, gazetteers=load_gazetteers(settings.gazetteers, settings.base_dir))
    for m in natives:
        check_native(m, resources)
    return resources


def execute_run(settings: RunSettings, registry: Optional[Mapping[str, ModelDescriptor]] = None,
                resources: Optional[Resources] = None, *, documents=None,
                workers: Optional[int] = None) -> tuple:
    """Execute a run. Returns ``(result locations, RunStatistics)``.

    Blocks and the models inside them run sequentially per document;
    documents may be processed concurrently by a worker pool.
    """
    if registry is None:
        registry = default_registry(endpoints=settings.endpoints)
    settings.check(registry)
    resources = prepare_resources(settings, registry, resources)
    if documents is None:
        documents, _skipped = acquire_documents(settings)
    else:
        documents = list(documents)
        if len({d.doc_id for d in documents}) != len(documents):
            raise ConfigError("duplicate doc_id in run")
    sink = _resolve_sink(settings)
    if isinstance(sink, StoreOutput):
        try:
            store_ensure_database(sink.connection)
        except NerkitError as exc:
            raise SinkError(str(exc)) from exc
    fingerprint = fingerprint_settings(settings)

    def work(doc):
        result = process_document(doc, settings, registry, resources, fingerprint)
        location = write_result(sink, result)
        return location, accumulate_stats(RunStatistics(), result)

    workers = workers or os.cpu_count() or 1
    locations = []
    stats = RunStatistics()
    if workers == 1 or len(documents) <= 1:
        outcomes = map(work, documents)
        for loc, partial in outcomes:
            locations.append(loc)
            stats = stats.merge(partial)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(work, d) for d in documents]
            try:
                for f in futures:
                    loc, partial = f.result()
                    locations.append(loc)
                    stats = stats.merge(partial)
            except BaseException:
                for f in futures:
                    f.cancel()
                raise
    # every referenced model appears in the statistics, even with zero documents
    models = dict(stats.models)
    for m in settings.model_ids:
        models.setdefault(m, ModelStats())
    stats = RunStatistics(stats.documents, dict(sorted(models.items())))
    write_stats(sink, stats)
    return locations, stats

