"""Read-only REST API over persisted results, plus NLP task proxying.

Endpoints::

    GET  /docs                       doc ids with results
    GET  /docs/{id}/results          full result document
    GET  /docs/{id}/summary          integrated summary block
    GET  /docs/{id}/entities         filtered, paginated mentions
    GET  /models | /categories | /stats
    POST /process                    start a run from a settings body
    GET  /process/{run_id}           run status
    POST /nlp/{task}                 proxy to a configured pos/depparse/coref service
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

import httpx
from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .categories import Category
from .errors import (BadFilter, BindError, Busy, ConfigError, NerkitError, NotFound,
                     SourceError, TaskNotConfigured, UnknownLabel, UnknownTask, UpstreamError)
from .ingestion import store_fetch, store_list
from .model import RunSettings, StoreConnection, default_registry
from .pipeline import RESULT_PREFIX, RESULT_SUFFIX, STATS_DOC, STATS_FILE, execute_run
from .results import DocumentResult, RunStatistics

log = logging.getLogger(__name__)

NLP_TASKS = ("pos", "depparse", "coref")
DEFAULT_LIMIT = 100
MAX_LIMIT = 1000

STATUS = {
    "BadFilter": 400,
    "ConfigError": 400,
    "NotFound": 404,
    "UnknownTask": 404,
    "Busy": 409,
    "UpstreamError": 502,
    "TaskNotConfigured": 503,
}


@dataclass(frozen=True)
class EntityFilter:
    category: Optional[Category] = None
    model_id: Optional[str] = None
    surface_contains: Optional[str] = None
    limit: int = DEFAULT_LIMIT
    offset: int = 0

    def __post_init__(self):
        if not 1 <= self.limit <= MAX_LIMIT:
            raise BadFilter(f"limit must be in [1, {MAX_LIMIT}]")
        if self.offset < 0:
            raise BadFilter("offset must be >= 0")

    @classmethod
    def parse(cls, category=None, model=None, contains=None, limit=None, offset=None) -> "EntityFilter":
        try:
            cat = Category.parse(category) if category else None
        except UnknownLabel:
            raise BadFilter(f"unknown category {category!r}") from None
        try:
            lim = DEFAULT_LIMIT if limit in (None, "") else int(limit)
            off = 0 if offset in (None, "") else int(offset)
        except ValueError:
            raise BadFilter("limit/offset must be integers") from None
        return cls(cat, model or None, contains or None, lim, off)

    def matches(self, m) -> bool:
        return ((self.category is None or m.category == self.category)
                and (self.model_id is None or m.model_id == self.model_id)
                and (self.surface_contains is None or self.surface_contains in m.surface))


@dataclass(frozen=True)
class EntityPage:
    total: int
    offset: int
    limit: int
    entities: tuple

    def to_dict(self, doc_id: str) -> dict:
        return {
            "doc_id": doc_id,
            "total": self.total,
            "offset": self.offset,
            "limit": self.limit,
            "entities": [{**m.to_dict(), "model_id": m.model_id} for m in self.entities],
        }


def query_entities(result: DocumentResult, f: EntityFilter, known_models=None) -> EntityPage:
    """Mentions of ``result`` matching ``f``, ordered by (start, model_id)."""
    if f.model_id is not None:
        known = set(known_models or ()) | {r.model_id for r in result.model_results}
        if f.model_id not in known:
            raise BadFilter(f"unknown model {f.model_id!r}")
    hits = [m for m in result.mentions() if f.matches(m)]
    hits.sort(key=lambda m: (m.start, m.model_id))
    return EntityPage(len(hits), f.offset, f.limit, tuple(hits[f.offset:f.offset + f.limit]))


class ResultsIndex:
    """doc_id -> location index over a results directory or store; results load lazily."""

    def __init__(self, source: Union[str, Path, StoreConnection]):
        self.source = source if isinstance(source, StoreConnection) else Path(source)
        self._index: dict = {}
        self.refresh()

    def refresh(self) -> list:
        index = {}
        if isinstance(self.source, StoreConnection):
            try:
                ids = store_list(self.source)
            except NotFound:
                ids = []
            except NerkitError as exc:
                raise SourceError(f"cannot list results store: {exc}") from exc
            for sid in ids:
                if sid.startswith(RESULT_PREFIX):
                    index[sid[len(RESULT_PREFIX):]] = sid
        else:
            if not self.source.is_dir():
                raise SourceError(f"results directory not found: {self.source}")
            for path in sorted(self.source.glob(f"*{RESULT_SUFFIX}")):
                try:
                    with open(path, encoding="utf-8") as fh:
                        doc_id = json.load(fh)["doc_id"]
                except (OSError, ValueError, KeyError) as exc:
                    log.warning("ignoring unreadable result file %s: %s", path, exc)
                    continue
                index[doc_id] = path
        self._index = index
        return self.doc_ids()

    def doc_ids(self) -> list:
        return sorted(self._index)

    def raw(self, doc_id: str) -> dict:
        loc = self._index.get(doc_id)
        if loc is None:
            self.refresh()
            loc = self._index.get(doc_id)
            if loc is None:
                raise NotFound(f"no results for document {doc_id!r}")
        if isinstance(self.source, StoreConnection):
            body = store_fetch(self.source, loc)
            return {k: v for k, v in body.items() if not k.startswith("_")}
        try:
            with open(loc, encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            raise NotFound(f"result file for {doc_id!r} disappeared") from None

    def load(self, doc_id: str) -> DocumentResult:
        return DocumentResult.from_dict(self.raw(doc_id))

    def stats(self) -> RunStatistics:
        if isinstance(self.source, StoreConnection):
            try:
                body = store_fetch(self.source, STATS_DOC)
            except NotFound:
                return RunStatistics()
            return RunStatistics.from_dict({k: v for k, v in body.items() if not k.startswith("_")})
        path = self.source / STATS_FILE
        if not path.exists():
            return RunStatistics()
        with open(path, encoding="utf-8") as fh:
            return RunStatistics.from_dict(json.load(fh))


def nlp_proxy(task: str, text: str, backends: Mapping[str, str], *, transport=None,
              timeout: float = 30.0) -> httpx.Response:
    """Forward ``text`` to ``{endpoint}/{task}``; the upstream response is returned as-is."""
    if task not in NLP_TASKS:
        raise UnknownTask(f"unknown NLP task {task!r}; expected one of {NLP_TASKS}")
    endpoint = backends.get(task)
    if not endpoint:
        raise TaskNotConfigured(f"no backend configured for {task!r}")
    url = endpoint.rstrip("/") + "/" + task
    try:
        with httpx.Client(timeout=timeout, transport=transport) as client:
            resp = client.post(url, json={"text": text})
    except httpx.HTTPError as exc:
        raise UpstreamError(f"{url}: {exc}") from exc
    if resp.status_code >= 400:
        raise UpstreamError(f"{url}: HTTP {resp.status_code}")
    return resp


class ProcessRunner:
    """Runs at most one pipeline at a time in a background thread."""

    def __init__(self, registry, on_done=None, resources=None):
        self.registry = registry
        self.on_done = on_done
        self.resources = resources
        self._lock = threading.Lock()
        self._busy = False
        self.runs: dict = {}

    def start(self, settings: RunSettings) -> str:
        with self._lock:
            if self._busy:
                raise Busy("a processing run is already in progress")
            self._busy = True
        run_id = uuid.uuid4().hex
        self.runs[run_id] = {"run_id": run_id, "status": "running"}
        thread = threading.Thread(target=self._run, args=(run_id, settings), daemon=True)
        thread.start()
        return run_id

    def _run(self, run_id, settings):
        try:
            locations, stats = execute_run(settings, self.registry, self.resources)
            self.runs[run_id].update(status="done", documents=len(locations))
        except Exception as exc:  # reported through the status endpoint
            log.exception("run %s failed", run_id)
            self.runs[run_id].update(status="failed", error=f"{type(exc).__name__}: {exc}")
        finally:
            with self._lock:
                self._busy = False
            if self.on_done:
                self.on_done()

    def status(self, run_id: str) -> dict:
        if run_id not in self.runs:
            raise NotFound(f"no run {run_id!r}")
        return dict(self.runs[run_id])


def create_app(results_source, nlp_backends: Optional[Mapping[str, str]] = None,
               registry=None, *, transport=None, resources=None) -> FastAPI:
    index = ResultsIndex(results_source)
    registry = registry if registry is not None else default_registry()
    backends = dict(nlp_backends or {})
    runner = ProcessRunner(registry, on_done=index.refresh, resources=resources)

    # /docs belongs to the results listing, so the interactive docs move aside
    app = FastAPI(title="nerkit results API", docs_url="/apidocs", redoc_url=None)
    app.state.index = index
    app.state.runner = runner

    @app.exception_handler(NerkitError)
    def _nerkit_error(request: Request, exc: NerkitError):
        code = type(exc).__name__
        if isinstance(exc, ConfigError):
            code = "ConfigError"
        return JSONResponse({"error": str(exc), "code": code}, status_code=STATUS.get(code, 500))

    @app.get("/docs")
    def list_docs(refresh: bool = False):
        return index.refresh() if refresh else index.doc_ids()

    @app.get("/docs/{doc_id}/results")
    def get_results(doc_id: str):
        return index.raw(doc_id)

    @app.get("/docs/{doc_id}/summary")
    def get_summary(doc_id: str):
        return index.raw(doc_id)["summary"]

    @app.get("/docs/{doc_id}/entities")
    def get_entities(doc_id: str, category: Optional[str] = None, model: Optional[str] = None,
                     contains: Optional[str] = None, limit: Optional[str] = None,
                     offset: Optional[str] = None):
        f = EntityFilter.parse(category, model, contains, limit, offset)
        return query_entities(index.load(doc_id), f, registry).to_dict(doc_id)

    @app.get("/models")
    def list_models():
        return [d.to_dict() for d in registry.values()]

    @app.get("/categories")
    def list_categories():
        return sorted(c.value for c in Category)

    @app.get("/stats")
    def get_stats():
        return index.stats().to_dict()

    @app.post("/process", status_code=202)
    def start_process(body: dict = Body(...)):
        settings = RunSettings.from_dict(body)
        settings.check(registry)
        return {"run_id": runner.start(settings)}

    @app.get("/process/{run_id}")
    def process_status(run_id: str):
        return runner.status(run_id)

    @app.post("/nlp/{task}")
    def proxy(task: str, body: dict = Body(...)):
        text = body.get("text")
        if not isinstance(text, str):
            raise BadFilter("body must be {'text': string}")
        resp = nlp_proxy(task, text, backends, transport=transport)
        return Response(resp.content, status_code=resp.status_code,
                        media_type=resp.headers.get("content-type", "application/json"))

    return app


class RunningService:
    def __init__(self, server, thread, port):
        self.server = server
        self.thread = thread
        self.port = port

    def shutdown(self, timeout: float = 10.0):
        self.server.should_exit = True
        if self.thread is not None:
            self.thread.join(timeout)


def bind_socket(host: str, port: int) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise BindError(f"cannot bind {host}:{port}: {exc.strerror or exc}") from exc
    sock.listen(128)
    return sock


def serve(results_source, nlp_backends=None, host: str = "127.0.0.1", port: int = 8000, *,
          registry=None, block: bool = True) -> Optional[RunningService]:
    """Serve the API. With ``block=False`` the server runs in a thread and a handle is returned."""
    import time

    import uvicorn

    app = create_app(results_source, nlp_backends, registry)
    sock = bind_socket(host, port)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    if block:
        server.run(sockets=[sock])
        return None
    thread = threading.Thread(target=server.run, kwargs={"sockets": [sock]}, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started and time.monotonic() < deadline:
        time.sleep(0.02)
    return RunningService(server, thread, sock.getsockname()[1])
