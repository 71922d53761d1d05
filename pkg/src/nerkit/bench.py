"""Evaluation harness: CoNLL-2003 corpora, gold replay, P/R/F1, and count reports."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .categories import CATEGORY_ORDER, Category, normalize_category
from .errors import BadTagSequence, DecodeError, IoError, ParseError
from .ingestion import DocumentRecord
from .model import ModelDescriptor, RawMention
from .results import RunStatistics

GOLD_ORACLE_ID = "native/gold-oracle"
DOCSTART = "-DOCSTART-"


@dataclass(frozen=True)
class GoldDocument:
    doc_id: str
    text: str
    mentions: tuple

    def record(self) -> DocumentRecord:
        return DocumentRecord(self.doc_id, self.text, metadata={"format": "conll2003"})


@dataclass(frozen=True)
class GoldCorpus:
    documents: tuple
    source_format: str = "conll2003"

    def records(self) -> list:
        return [d.record() for d in self.documents]

    def mentions(self) -> list:
        return [m for d in self.documents for m in d.mentions]

    def category_counts(self) -> dict:
        c = Counter(m.category for m in self.mentions())
        return {k: c[k] for k in CATEGORY_ORDER if c[k]}

    def write_records(self, directory) -> list:
        """Dump each document as an extracted-content record (keeps doc ids)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, d in enumerate(self.documents):
            p = directory / f"doc{i:05d}.json"
            p.write_text(json.dumps({"id": d.doc_id, "content": d.text}, ensure_ascii=False),
                         encoding="utf-8")
            paths.append(p)
        return paths


def iob_to_spans(tags, strict: bool = False) -> list:
    """Token-index spans ``(first, last_exclusive, label)`` from IOB1 or IOB2 tags.

    A B- tag or a label change starts a new span. An I- tag that does not
    continue a span of the same label opens one (IOB1); in strict mode it
    raises BadTagSequence instead.
    """
    spans = []
    cur = None  # [start, label]
    for i, tag in enumerate(tags):
        if tag == "O":
            if cur:
                spans.append((cur[0], i, cur[1]))
                cur = None
            continue
        prefix, sep, label = tag.partition("-")
        if not sep or prefix not in ("B", "I") or not label:
            raise ParseError(f"bad IOB tag {tag!r}")
        if prefix == "I" and cur and cur[1] == label:
            continue
        if prefix == "I" and strict:
            raise BadTagSequence(f"I-{label} at token {i} does not continue a {label} span")
        if cur:
            spans.append((cur[0], i, cur[1]))
        cur = [i, label]
    if cur:
        spans.append((cur[0], len(tags), cur[1]))
    return spans


def _build_document(doc_id: str, sentences, strict: bool) -> GoldDocument:
    lines = []
    mentions = []
    offset = 0
    for tokens, tags in sentences:
        starts = []
        pos = offset
        for t in tokens:
            starts.append(pos)
            pos += len(t) + 1
        for first, last, label in iob_to_spans(tags, strict):
            start = starts[first]
            end = starts[last - 1] + len(tokens[last - 1])
            surface = " ".join(tokens[first:last])
            mentions.append(RawMention(surface, normalize_category(label), start, end, 1.0))
        line = " ".join(tokens)
        lines.append(line)
        offset += len(line) + 1
    return GoldDocument(doc_id, "\n".join(lines), tuple(mentions))


def parse_conll(lines: Iterable[str], name: str = "corpus", strict: bool = False) -> GoldCorpus:
    docs = []
    sentences = []
    tokens, tags = [], []

    def end_sentence():
        nonlocal tokens, tags
        if tokens:
            sentences.append((tokens, tags))
        tokens, tags = [], []

    def end_document():
        nonlocal sentences
        end_sentence()
        if sentences:
            docs.append(_build_document(f"{name}#{len(docs) + 1}", sentences, strict))
        sentences = []

    for lineno, line in enumerate(lines, 1):
        cols = line.split()
        if not cols:
            end_sentence()
            continue
        if cols[0] == DOCSTART:
            end_document()
            continue
        if len(cols) != 4:
            raise ParseError(f"{name}:{lineno}: expected 4 columns, got {len(cols)}")
        tokens.append(cols[0])
        tags.append(cols[3])
    end_document()
    return GoldCorpus(tuple(docs))


def load_conll(path, strict: bool = False) -> GoldCorpus:
    """Read a CoNLL-2003 file. Tokens are joined by single spaces and
    sentences by newlines; gold offsets refer to that reconstructed text."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"{path} is not valid UTF-8") from exc
    return parse_conll(text.splitlines(), path.name, strict)


class GoldOracleBackend:
    """Native backend that replays a corpus's gold annotations by doc id."""

    model_id = GOLD_ORACLE_ID

    def __init__(self, corpus: GoldCorpus):
        self._gold = {d.doc_id: d.mentions for d in corpus.documents}

    @property
    def descriptor(self) -> ModelDescriptor:
        return ModelDescriptor(self.model_id, "native")

    def __call__(self, doc) -> list:
        return list(self._gold.get(doc.doc_id, ()))


def gold_oracle_backend(corpus: GoldCorpus) -> GoldOracleBackend:
    return GoldOracleBackend(corpus)


# -- metrics --------------------------------------------------------------------

@dataclass(frozen=True)
class Scores:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        if self.tp + self.fp == 0:
            return 1.0 if self.tp + self.fn == 0 else 0.0
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        if self.tp + self.fn == 0:
            return 1.0 if self.tp + self.fp == 0 else 0.0
        return self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class EvalReport:
    overall: Scores
    per_category: dict

    @property
    def precision(self):
        return self.overall.precision

    @property
    def recall(self):
        return self.overall.recall

    @property
    def f1(self):
        return self.overall.f1

    def to_dict(self) -> dict:
        return {"overall": self.overall.to_dict(),
                "per_category": {c.value: s.to_dict() for c, s in self.per_category.items()}}

    def format(self) -> str:
        rows = [f"{'category':<14} {'P':>6} {'R':>6} {'F1':>6} {'tp':>6} {'fp':>6} {'fn':>6}"]
        items = list(self.per_category.items()) + [("overall", self.overall)]
        for name, s in items:
            name = name.value if isinstance(name, Category) else name
            rows.append(f"{name:<14} {s.precision:6.3f} {s.recall:6.3f} {s.f1:6.3f} "
                        f"{s.tp:6d} {s.fp:6d} {s.fn:6d}")
        return "\n".join(rows)


def _category(m) -> Category:
    return m.category if isinstance(m.category, Category) else Category.parse(m.category)


def _score_keys(p: Counter, g: Counter) -> EvalReport:
    # keys are tuples whose first element is the category
    tp = p & g
    cats = sorted({k[0] for k in p} | {k[0] for k in g}, key=CATEGORY_ORDER.index)

    def scores(keep):
        t = sum(n for k, n in tp.items() if keep(k))
        return Scores(t, sum(n for k, n in p.items() if keep(k)) - t,
                      sum(n for k, n in g.items() if keep(k)) - t)

    per_cat = {c: scores(lambda k, c=c: k[0] == c) for c in cats}
    return EvalReport(scores(lambda k: True), per_cat)


def evaluate(pred, gold) -> EvalReport:
    """Exact span + category matching (multiset semantics)."""
    return _score_keys(Counter((_category(m), m.start, m.end) for m in pred),
                       Counter((_category(m), m.start, m.end) for m in gold))


def evaluate_corpus(corpus: GoldCorpus, predictions) -> EvalReport:
    """Score ``{doc_id: mentions}`` against every document of ``corpus``."""
    p, g = Counter(), Counter()
    for d in corpus.documents:
        g.update((_category(m), d.doc_id, m.start, m.end) for m in d.mentions)
        p.update((_category(m), d.doc_id, m.start, m.end) for m in predictions.get(d.doc_id, ()))
    return _score_keys(p, g)


# -- reports ----------------------------------------------------------------------

DISPLAY_NAMES = {
    Category.LOCATION: "location",
    Category.ORG: "organisation",
    Category.PERSON: "person",
    Category.NORP: "NORP",
    Category.FAC: "FAC",
    Category.GPE: "GPE",
}
REPORT_ORDER = (Category.LOCATION, Category.ORG, Category.PERSON) + tuple(
    c for c in CATEGORY_ORDER if c not in (Category.LOCATION, Category.ORG, Category.PERSON))


def display_name(c: Category) -> str:
    return DISPLAY_NAMES.get(c, c.value.lower())


def format_counts(counts) -> str:
    """``location:2165, organisation:2586, person:2726 (Total = 7477)``."""
    parts = [f"{display_name(c)}:{counts[c]}" for c in REPORT_ORDER if counts.get(c)]
    total = sum(counts.values())
    return (", ".join(parts) + " " if parts else "") + f"(Total = {total})"


def report_table(stats: RunStatistics, dataset_name: str, header: bool = True) -> str:
    """One row per model: id | dataset | exec seconds | category counts."""
    rows = []
    if header:
        rows.append("Model | Dataset | Exec. Time (seconds) | Number of Recognised Entities")
    models = stats.models or {"-": None}
    for model_id, s in models.items():
        counts = s.categories if s is not None else {}
        secs = s.total_exec_time_s if s is not None else 0.0
        rows.append(f"{model_id} | {dataset_name} | {secs:.2f} | {format_counts(counts)}")
    return "\n".join(rows) + "\n"

