import hashlib
import json
import socket
import threading
import time

import httpx
import pytest
from fastapi.testclient import TestClient
from hypothesis import given, settings, strategies as st

from nerkit.api import EntityFilter, ResultsIndex, create_app, nlp_proxy, query_entities, serve
from nerkit.categories import Category
from nerkit.errors import BadFilter, BindError, TaskNotConfigured, UnknownTask, UpstreamError
from nerkit.ingestion import store_put
from nerkit.model import EntityMention, ModelDescriptor, RawMention, default_registry
from nerkit.pipeline import write_result
from nerkit.model import DirectoryOutput, StoreOutput
from nerkit.recognizers import Resources
from nerkit.results import DocumentResult, ModelRunResult, build_summary

from oracles import oracle_filter

C = Category
TEXT = "Canberra is cold. Ada Lovelace met Bob in Canberra on 5 May. Bob paid $5."


def mention(surface, cat, model, nth=0):
    start = -1
    for _ in range(nth + 1):
        start = TEXT.index(surface, start + 1)
    return EntityMention(surface, cat, start, start + len(surface), surface, model)


def make_result(doc_id, per_model):
    mrs = [ModelRunResult(m, 0.01, ents) for m, ents in per_model.items()]
    return DocumentResult(doc_id, "", "fp", "2026-01-01T00:00:00Z", mrs, build_summary(mrs))


def corpus():
    a = make_result("a.txt", {
        "spacy/en_core_web_sm": [mention("Canberra", C.GPE, "spacy/en_core_web_sm"),
                                 mention("Ada Lovelace", C.PERSON, "spacy/en_core_web_sm"),
                                 mention("Canberra", C.GPE, "spacy/en_core_web_sm", 1)],
        "flair/ner": [mention("Canberra", C.LOCATION, "flair/ner"), mention("Bob", C.PERSON, "flair/ner"),
                      mention("Bob", C.PERSON, "flair/ner", 1)],
        "native/patterns": [mention("5 May", C.DATE, "native/patterns"), mention("$5", C.MONEY, "native/patterns")],
    })
    b = make_result("b.txt", {"native/patterns": [mention("$5", C.MONEY, "native/patterns")]})
    c = make_result("sub:c.txt", {"native/gazetteer": [], "flair/ner": []})
    return [a, b, c]


@pytest.fixture
def results_dir(tmp_path):
    out = tmp_path / "results"
    for r in corpus():
        write_result(DirectoryOutput(str(out)), r)
    return out


@pytest.fixture
def client(results_dir):
    return TestClient(create_app(results_dir, registry=default_registry("http://models.test")))


def test_empty_results_dir(tmp_path):
    (tmp_path / "r").mkdir()
    assert TestClient(create_app(tmp_path / "r")).get("/docs").json() == []


def test_one_result(tmp_path):
    write_result(DirectoryOutput(str(tmp_path)), corpus()[1])
    assert TestClient(create_app(tmp_path)).get("/docs").json() == ["b.txt"]


def test_docs_results_summary(client):
    assert client.get("/docs").json() == ["a.txt", "b.txt", "sub:c.txt"]
    body = client.get("/docs/a.txt/results").json()
    assert body["doc_id"] == "a.txt" and body["schema_version"] == "1"
    summary = client.get("/docs/a.txt/summary").json()
    assert summary["grand_total"] == 8
    assert summary["categories"]["GPE"] == [
        {"surface": "Canberra", "count": 2, "models": ["spacy/en_core_web_sm"]}]


def test_unknown_doc(client):
    r = client.get("/docs/nope/results")
    assert r.status_code == 404 and r.json()["code"] == "NotFound"


def test_category_filter_sorted(client):
    body = client.get("/docs/a.txt/entities", params={"category": "PERSON"}).json()
    assert [(e["surface"], e["start"], e["model_id"]) for e in body["entities"]] == [
        ("Ada Lovelace", 18, "spacy/en_core_web_sm"), ("Bob", 35, "flair/ner"), ("Bob", 61, "flair/ner")]
    assert body["total"] == 3


def test_same_start_orders_by_model(client):
    body = client.get("/docs/a.txt/entities", params={"contains": "Canberra"}).json()
    assert [(e["start"], e["model_id"]) for e in body["entities"]] == [
        (0, "flair/ner"), (0, "spacy/en_core_web_sm"), (42, "spacy/en_core_web_sm")]


def test_empty_page(client):
    body = client.get("/docs/a.txt/entities", params={"category": "LAW"}).json()
    assert body["entities"] == [] and body["total"] == 0


@pytest.mark.parametrize("params", [{"category": "BOGUS"}, {"limit": "0"}, {"limit": "1001"},
                                    {"limit": "ten"}, {"offset": "-1"}, {"model": "nobody/none"}])
def test_bad_filters(client, params):
    r = client.get("/docs/a.txt/entities", params=params)
    assert r.status_code == 400
    assert r.json()["code"] == "BadFilter" and r.json()["error"]


def test_model_filter_accepts_registry_models_without_hits(client):
    body = client.get("/docs/a.txt/entities", params={"model": "bert/ner"}).json()
    assert body["total"] == 0


def test_catalogue_endpoints(client):
    cats = client.get("/categories").json()
    assert len(cats) == 19 and cats == sorted(cats)
    assert {"PERSON", "MISCELLANEOUS"} <= set(cats)
    models = client.get("/models").json()
    assert len(models) == 24 and {"model_id", "kind", "endpoint"} <= set(models[0])


def test_stats_zeroed_before_any_run(client):
    assert client.get("/stats").json() == {"documents": 0, "models": {}}


def digest(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


def test_endpoints_are_read_only(client, results_dir):
    before = digest(results_dir)
    for path in ("/docs", "/docs/a.txt/results", "/docs/a.txt/summary", "/docs/a.txt/entities", "/stats",
                 "/models", "/categories"):
        assert client.get(path).status_code == 200
    assert digest(results_dir) == before


def test_store_backed_index(couch):
    couch.create_database("res")
    from nerkit.model import StoreConnection

    conn = StoreConnection("http://couch.test", "res", transport=couch.transport)
    for r in corpus():
        write_result(StoreOutput(conn), r)
    store_put(conn, "unrelated", {"content": "x"})
    index = ResultsIndex(conn)
    assert index.doc_ids() == ["a.txt", "b.txt", "sub:c.txt"]
    assert index.load("b.txt") == corpus()[1]
    app = TestClient(create_app(conn))
    assert app.get("/docs/b.txt/entities").json()["total"] == 1
    assert app.get("/stats").json()["documents"] == 0


# -- NLP proxy --------------------------------------------------------------------

def echo_transport(status=200):
    def handler(request):
        return httpx.Response(status, json={"echo": json.loads(request.content), "path": request.url.path})
    return httpx.MockTransport(handler)


def test_nlp_proxy_rules():
    with pytest.raises(TaskNotConfigured):
        nlp_proxy("pos", "x", {})
    with pytest.raises(UnknownTask):
        nlp_proxy("stemming", "x", {"stemming": "http://x"})
    resp = nlp_proxy("pos", "hi", {"pos": "http://nlp.test"}, transport=echo_transport())
    assert resp.json() == {"echo": {"text": "hi"}, "path": "/pos"}
    with pytest.raises(UpstreamError):
        nlp_proxy("coref", "hi", {"coref": "http://nlp.test"}, transport=echo_transport(500))


def test_nlp_endpoint(results_dir):
    app = TestClient(create_app(results_dir, {"pos": "http://nlp.test"}, transport=echo_transport()))
    r = app.post("/nlp/pos", json={"text": "Bob ran"})
    assert r.status_code == 200 and r.json() == {"echo": {"text": "Bob ran"}, "path": "/pos"}
    assert app.post("/nlp/depparse", json={"text": "x"}).status_code == 503
    assert app.post("/nlp/stemming", json={"text": "x"}).json()["code"] == "UnknownTask"
    bad = TestClient(create_app(results_dir, {"pos": "http://nlp.test"}, transport=echo_transport(502)))
    assert bad.post("/nlp/pos", json={"text": "x"}).status_code == 502


# -- processing trigger -------------------------------------------------------------

def test_process_trigger_and_busy(tmp_path, results_dir):
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "new.txt").write_text("abc")
    gate = threading.Event()

    def slow(doc):
        gate.wait(10)
        return [RawMention("b", C.LAW, 1, 2)]

    reg = {**default_registry(), "native/slow": ModelDescriptor("native/slow", "native")}
    app = TestClient(create_app(results_dir, registry=reg, resources=Resources(backends={"native/slow": slow})))
    body = {"input": {"kind": "files", "paths": [str(tmp_path / "in")]},
            "blocks": [{"block_id": "b", "models": ["native/slow"]}],
            "output": {"kind": "directory", "path": str(results_dir)}}
    first = app.post("/process", json=body)
    assert first.status_code == 202
    busy = app.post("/process", json=body)
    assert busy.status_code == 409 and busy.json()["code"] == "Busy"
    gate.set()
    run_id = first.json()["run_id"]
    for _ in range(200):
        status = app.get(f"/process/{run_id}").json()
        if status["status"] != "running":
            break
        time.sleep(0.02)
    assert status == {"run_id": run_id, "status": "done", "documents": 1}
    assert "new.txt" in app.get("/docs").json()
    assert app.get("/stats").json()["models"]["native/slow"]["categories"] == {"LAW": 1}


def test_process_rejects_bad_settings(results_dir):
    app = TestClient(create_app(results_dir))
    r = app.post("/process", json={"blocks": []})
    assert r.status_code == 400 and r.json()["code"] == "ConfigError"


# -- serving ------------------------------------------------------------------------

def test_occupied_port(results_dir):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        s.listen(1)
        port = s.getsockname()[1]
        with pytest.raises(BindError):
            serve(results_dir, port=port, block=False)


def test_serve_in_background(results_dir):
    handle = serve(results_dir, port=0, block=False)
    try:
        r = httpx.get(f"http://127.0.0.1:{handle.port}/docs", timeout=5)
        assert r.json() == ["a.txt", "b.txt", "sub:c.txt"]
    finally:
        handle.shutdown()


# -- oracle equivalence ------------------------------------------------------------

filters = st.fixed_dictionaries({
    "doc": st.sampled_from(["a.txt", "b.txt", "sub:c.txt"]),
    "category": st.one_of(st.none(), st.sampled_from(["GPE", "PERSON", "MONEY", "LOCATION", "LAW"])),
    "model": st.one_of(st.none(), st.sampled_from(["flair/ner", "native/patterns", "spacy/en_core_web_sm"])),
    "contains": st.one_of(st.none(), st.sampled_from(["a", "Can", "$", "Bob", "zzz"])),
    "limit": st.integers(1, 4),
})


def all_pages(result, f_kwargs, limit):
    pages, offset = [], 0
    while True:
        page = query_entities(result, EntityFilter(**f_kwargs, limit=limit, offset=offset), default_registry())
        pages.extend(page.to_dict(result.doc_id)["entities"])
        offset += limit
        if offset >= page.total:
            return pages


@settings(max_examples=100)
@given(filters)
def test_query_matches_linear_scan(f):
    result = {r.doc_id: r for r in corpus()}[f["doc"]]
    kwargs = {"category": C(f["category"]) if f["category"] else None, "model_id": f["model"],
              "surface_contains": f["contains"]}
    expected = oracle_filter(result.to_dict(), f["category"], f["model"], f["contains"])
    full = query_entities(result, EntityFilter(**kwargs, limit=1000), default_registry())
    assert full.to_dict(result.doc_id)["entities"] == expected
    assert all_pages(result, kwargs, f["limit"]) == expected


def test_filter_parse():
    f = EntityFilter.parse("gpe".upper(), "flair/ner", "Can", "5", "2")
    assert (f.category, f.limit, f.offset) == (C.GPE, 5, 2)
    with pytest.raises(BadFilter):
        EntityFilter.parse(limit="1001")
