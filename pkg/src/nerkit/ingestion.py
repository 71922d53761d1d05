"""Document loading from files, extracted-content records, and a CouchDB-style store."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional
from urllib.parse import quote

import httpx

from .errors import (Conflict, DecodeError, IoError, MissingContent, NotFound,
                     ParseError, TransportError)
from .model import StoreConnection

TEXT_KEYS = ("content", "text", "body")


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    text: str
    source_uri: str = ""
    metadata: Mapping[str, str] = field(default_factory=dict)
    content_hash: str = ""

    def __post_init__(self):
        digest = content_hash(self.text)
        if not self.content_hash:
            object.__setattr__(self, "content_hash", digest)
        elif self.content_hash != digest:
            raise ParseError(f"content hash mismatch for {self.doc_id!r}")
        object.__setattr__(self, "metadata", dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "source_uri": self.source_uri,
            "text": self.text,
            "metadata": dict(self.metadata),
            "content_hash": self.content_hash,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DocumentRecord":
        return cls(d["doc_id"], d["text"], d.get("source_uri", ""),
                   d.get("metadata", {}), d.get("content_hash", ""))


def _read_text(path: Path) -> str:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"{path} is not valid UTF-8: {exc}") from exc
    return normalize_newlines(text.removeprefix("\ufeff"))


def _doc_id_for(path: Path, root: Optional[Path]) -> str:
    root = Path(root) if root is not None else path.parent
    try:
        rel = os.path.relpath(path, root)
    except ValueError:
        rel = path.name
    return rel.replace(os.sep, ":").replace("/", ":")


def load_plain_text(path, root=None) -> DocumentRecord:
    """Load a UTF-8 text file. ``doc_id`` is the path relative to ``root``
    (default: the file's folder) with separators replaced by ``:``."""
    path = Path(path)
    text = _read_text(path)
    return DocumentRecord(
        doc_id=_doc_id_for(path, root),
        text=text,
        source_uri=path.resolve().as_uri(),
        metadata={"format": "text"},
    )


def _scalar(v) -> Optional[str]:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, int, float)):
        return json.dumps(v)
    return None


def record_from_mapping(obj, fallback_id: str, source_uri: str = "") -> DocumentRecord:
    """Map an extracted-content object onto a DocumentRecord.

    Text comes from the first present key among content/text/body; other
    top-level scalars (except underscore-prefixed store fields) become
    metadata.
    """
    if not isinstance(obj, dict):
        raise ParseError("extracted record must be a JSON object")
    key = next((k for k in TEXT_KEYS if k in obj), None)
    if key is None:
        raise MissingContent(f"record {fallback_id!r} has none of {TEXT_KEYS}")
    if not isinstance(obj[key], str):
        raise ParseError(f"record field {key!r} is not a string")
    doc_id = obj.get("_id", obj.get("id", fallback_id))
    if not isinstance(doc_id, str):
        doc_id = json.dumps(doc_id)
    meta = {}
    for k, v in obj.items():
        if k in (key, "id") or k.startswith("_"):
            continue
        s = _scalar(v)
        if s is not None:
            meta[k] = s
    return DocumentRecord(doc_id, normalize_newlines(obj[key]), source_uri, meta)


def load_extracted_record(path, root=None) -> DocumentRecord:
    path = Path(path)
    raw = _read_text(path)
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return record_from_mapping(obj, _doc_id_for(path, root), path.resolve().as_uri())


def scan_input(root, extensions: Iterable[str]) -> list:
    """Recursively list files under ``root`` whose suffix is in ``extensions``, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise IoError(f"input directory not found: {root}")
    exts = {e.lower().lstrip(".") for e in extensions}
    found = []
    for dirpath, _dirnames, filenames in os.walk(root):
        for name in filenames:
            if name.rsplit(".", 1)[-1].lower() in exts and "." in name:
                found.append(Path(dirpath) / name)
    return sorted(found, key=lambda p: p.relative_to(root).as_posix())


# -- document store ----------------------------------------------------------

def _client(conn: StoreConnection) -> httpx.Client:
    auth = tuple(conn.credentials) if conn.credentials else None
    return httpx.Client(base_url=conn.base_url.rstrip("/"), timeout=conn.timeout,
                        auth=auth, transport=conn.transport)


def _doc_path(conn: StoreConnection, doc_id: str) -> str:
    return f"/{quote(conn.database, safe='')}/{quote(doc_id, safe='')}"


def _request(conn: StoreConnection, method: str, path: str, **kw) -> httpx.Response:
    try:
        with _client(conn) as client:
            resp = client.request(method, path, **kw)
    except httpx.HTTPError as exc:
        raise TransportError(f"{method} {conn.base_url}{path}: {exc}") from exc
    if resp.status_code == 404:
        raise NotFound(f"{path} not found")
    if resp.status_code == 409:
        raise Conflict(f"{path}: revision conflict")
    if resp.status_code >= 400:
        raise TransportError(f"{method} {path}: HTTP {resp.status_code}")
    return resp


def _json(resp: httpx.Response):
    try:
        return resp.json()
    except ValueError as exc:
        raise ParseError(f"store returned non-JSON body: {exc}") from exc


def store_fetch(conn: StoreConnection, doc_id: str) -> dict:
    """Raw document body (store bookkeeping fields ``_id``/``_rev`` included)."""
    body = _json(_request(conn, "GET", _doc_path(conn, doc_id)))
    if not isinstance(body, dict):
        raise ParseError("store document is not an object")
    return body


def store_get(conn: StoreConnection, doc_id: str) -> DocumentRecord:
    body = store_fetch(conn, doc_id)
    uri = f"{conn.base_url.rstrip('/')}/{conn.database}/{doc_id}"
    return record_from_mapping(body, doc_id, uri)


def store_revision(conn: StoreConnection, doc_id: str) -> Optional[str]:
    try:
        return store_fetch(conn, doc_id).get("_rev")
    except NotFound:
        return None


def store_put(conn: StoreConnection, doc_id: str, payload: Mapping, rev: Optional[str] = None) -> str:
    """Write ``payload`` under ``doc_id``; returns the new revision token.

    Overwriting an existing document requires its current ``rev``.
    """
    body = {k: v for k, v in payload.items() if k not in ("_id", "_rev")}
    if rev is not None:
        body["_rev"] = rev
    try:
        data = json.dumps(body, ensure_ascii=False)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"payload not serializable: {exc}") from exc
    resp = _request(conn, "PUT", _doc_path(conn, doc_id), content=data.encode("utf-8"),
                    headers={"Content-Type": "application/json"})
    out = _json(resp)
    if not isinstance(out, dict) or "rev" not in out:
        raise ParseError("store PUT response lacks 'rev'")
    return out["rev"]


def store_list(conn: StoreConnection) -> list:
    body = _json(_request(conn, "GET", f"/{quote(conn.database, safe='')}/_all_docs"))
    try:
        return sorted(row["id"] for row in body["rows"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed _all_docs response: {exc!r}") from exc


def store_ensure_database(conn: StoreConnection):
    """Create the database if missing (CouchDB answers 412 when it exists)."""
    try:
        with _client(conn) as client:
            resp = client.put(f"/{quote(conn.database, safe='')}")
    except httpx.HTTPError as exc:
        raise TransportError(f"cannot reach store {conn.base_url}: {exc}") from exc
    if resp.status_code not in (200, 201, 202, 412):
        raise TransportError(f"cannot create database {conn.database}: HTTP {resp.status_code}")
