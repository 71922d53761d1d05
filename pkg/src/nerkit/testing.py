"""In-process fakes for the document store and remote NER servers.

Both expose an ``httpx.MockTransport`` via ``.transport`` so clients can be
pointed at them without sockets.
"""

from __future__ import annotations

import json
import re
import threading
import uuid
from collections import Counter
from typing import Callable, Optional
from urllib.parse import unquote, urlsplit

import httpx


def _json_response(status: int, body) -> httpx.Response:
    return httpx.Response(status, json=body)


class MemoryCouchServer:
    """A CouchDB-like store: databases of JSON documents with revision tokens."""

    def __init__(self):
        self.databases: dict = {}
        self._lock = threading.Lock()
        self.requests = Counter()
        self.transport = httpx.MockTransport(self.handle)

    def create_database(self, name: str):
        self.databases.setdefault(name, {})

    def put_raw(self, db: str, doc_id: str, body: dict) -> str:
        """Seed a document directly, bypassing revision checks."""
        self.create_database(db)
        old = self.databases[db].get(doc_id)
        n = int(old["_rev"].split("-")[0]) + 1 if old else 1
        rev = f"{n}-{uuid.uuid4().hex[:8]}"
        self.databases[db][doc_id] = {**body, "_id": doc_id, "_rev": rev}
        return rev

    def handle(self, request: httpx.Request) -> httpx.Response:
        self.requests[request.method] += 1
        parts = [unquote(p) for p in urlsplit(str(request.url)).path.split("/") if p]
        with self._lock:
            if len(parts) == 1:
                return self._database(request, parts[0])
            if len(parts) == 2 and parts[1] == "_all_docs":
                db = self.databases.get(parts[0])
                if db is None:
                    return _json_response(404, {"error": "not_found", "reason": "no database"})
                rows = [{"id": k, "key": k, "value": {"rev": v["_rev"]}} for k, v in sorted(db.items())]
                return _json_response(200, {"total_rows": len(rows), "offset": 0, "rows": rows})
            if len(parts) == 2:
                return self._document(request, parts[0], parts[1])
        return _json_response(400, {"error": "bad_request"})

    def _database(self, request, name):
        if request.method == "PUT":
            if name in self.databases:
                return _json_response(412, {"error": "file_exists"})
            self.databases[name] = {}
            return _json_response(201, {"ok": True})
        if request.method == "GET" and name in self.databases:
            return _json_response(200, {"db_name": name, "doc_count": len(self.databases[name])})
        return _json_response(404, {"error": "not_found"})

    def _document(self, request, db_name, doc_id):
        db = self.databases.get(db_name)
        if db is None:
            return _json_response(404, {"error": "not_found", "reason": "no database"})
        if request.method == "GET":
            doc = db.get(doc_id)
            if doc is None:
                return _json_response(404, {"error": "not_found", "reason": "missing"})
            return _json_response(200, doc)
        if request.method == "PUT":
            try:
                body = json.loads(request.content)
            except ValueError:
                return _json_response(400, {"error": "bad_request"})
            current = db.get(doc_id)
            given = body.pop("_rev", None)
            if (current is None and given is not None) or (current is not None and given != current["_rev"]):
                return _json_response(409, {"error": "conflict"})
            n = int(current["_rev"].split("-")[0]) + 1 if current else 1
            rev = f"{n}-{uuid.uuid4().hex[:8]}"
            db[doc_id] = {**body, "_id": doc_id, "_rev": rev}
            return _json_response(201, {"ok": True, "id": doc_id, "rev": rev})
        if request.method == "DELETE":
            if doc_id not in db:
                return _json_response(404, {"error": "not_found"})
            del db[doc_id]
            return _json_response(200, {"ok": True})
        return _json_response(405, {"error": "method_not_allowed"})


class MockNerServer:
    """Fake annotate/models server.

    ``annotator(model, text) -> list[dict]`` produces entities. ``fail_times``
    makes the first N annotate calls answer ``fail_status``; ``mode`` can
    be ``"ok"``, ``"malformed"``, ``"non_json"``, ``"bad_offsets"`` or
    ``"timeout"``.
    """

    def __init__(self, annotator: Optional[Callable] = None, models=("ner",), *,
                 fail_times: int = 0, fail_status: int = 503, mode: str = "ok"):
        self.annotator = annotator or capitalized_words
        self.models = list(models)
        self.fail_times = fail_times
        self.fail_status = fail_status
        self.mode = mode
        self.calls = 0
        self.payloads = []
        self._lock = threading.Lock()
        self.transport = httpx.MockTransport(self.handle)

    def handle(self, request: httpx.Request) -> httpx.Response:
        path = urlsplit(str(request.url)).path
        if request.method == "GET" and path.endswith("/models"):
            return _json_response(200, {"models": self.models})
        if request.method != "POST" or not path.endswith("/annotate"):
            return _json_response(404, {"error": f"no route {path}"})
        with self._lock:
            self.calls += 1
            call = self.calls
        body = json.loads(request.content)
        self.payloads.append(body)
        if call <= self.fail_times:
            if self.mode == "timeout":
                raise httpx.ReadTimeout("simulated timeout", request=request)
            return _json_response(self.fail_status, {"error": "simulated failure"})
        if body.get("model") not in self.models:
            return _json_response(400, {"error": f"unknown model {body.get('model')!r}"})
        if self.mode == "non_json":
            return httpx.Response(200, content=b"<html>oops</html>")
        entities = self.annotator(body["model"], body["text"])
        if self.mode == "malformed":
            entities = entities + [{"surface": "x", "label": "PER"}]
        elif self.mode == "bad_offsets":
            entities = [{**e, "start": e["start"] + 1, "end": e["end"] + 1} for e in entities
                        if e["end"] < len(body["text"])]
        return _json_response(200, {"entities": entities})


def capitalized_words(model: str, text: str) -> list:
    """Toy annotator: every capitalised word is a PER mention."""
    return [{"surface": m.group(), "label": "PER", "start": m.start(), "end": m.end(), "score": 0.5}
            for m in re.finditer(r"\b[A-Z][a-z]+\b", text)]
