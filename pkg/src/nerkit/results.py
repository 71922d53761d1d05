"""Per-document results, integrated summaries and run statistics."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .categories import CATEGORY_ORDER, Category, category_rank
from .model import EntityMention

SCHEMA_VERSION = "1"


def _ordered_counts(counts: Mapping[Category, int]) -> dict:
    return {c: counts[c] for c in CATEGORY_ORDER if counts.get(c)}


@dataclass(frozen=True)
class ModelRunResult:
    model_id: str
    exec_time_s: float = 0.0
    entities: tuple = ()
    error: Optional[str] = None
    dropped_spans: int = 0
    attempts: int = 0

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        # microsecond resolution keeps statistics sums exact
        object.__setattr__(self, "exec_time_s", round(max(float(self.exec_time_s), 0.0), 6))
        if self.error is not None and self.entities:
            raise ValueError("a failed model run carries no entities")

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        d = {"model_id": self.model_id, "exec_time_s": self.exec_time_s}
        if self.error is not None:
            d["error"] = self.error
        d["entities"] = [e.to_dict() for e in self.entities]
        if self.dropped_spans:
            d["dropped_spans"] = self.dropped_spans
        if self.attempts:
            d["attempts"] = self.attempts
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelRunResult":
        mid = d["model_id"]
        return cls(
            model_id=mid,
            exec_time_s=d.get("exec_time_s", 0.0),
            entities=tuple(EntityMention.from_dict(e, mid) for e in d.get("entities", ())),
            error=d.get("error"),
            dropped_spans=d.get("dropped_spans", 0),
            attempts=d.get("attempts", 0),
        )


@dataclass(frozen=True)
class SummaryEntry:
    surface: str
    count: int
    models: tuple


@dataclass(frozen=True)
class IntegratedSummary:
    categories: Mapping[Category, tuple] = field(default_factory=dict)
    totals: Mapping[str, Mapping[Category, int]] = field(default_factory=dict)
    grand_total: int = 0

    def to_dict(self) -> dict:
        return {
            "categories": {
                c.value: [{"surface": e.surface, "count": e.count, "models": list(e.models)}
                          for e in entries]
                for c, entries in self.categories.items()
            },
            "totals": {m: {c.value: n for c, n in counts.items()} for m, counts in self.totals.items()},
            "grand_total": self.grand_total,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "IntegratedSummary":
        cats = {
            Category.parse(c): tuple(SummaryEntry(e["surface"], e["count"], tuple(e["models"]))
                                     for e in entries)
            for c, entries in d.get("categories", {}).items()
        }
        totals = {m: {Category.parse(c): n for c, n in counts.items()}
                  for m, counts in d.get("totals", {}).items()}
        return cls(cats, totals, d.get("grand_total", 0))


def build_summary(model_results) -> IntegratedSummary:
    """Group all mentions by (category, exact surface) across model results."""
    groups = defaultdict(lambda: [0, set()])
    totals = {}
    grand = 0
    for r in model_results:
        per_model = totals.setdefault(r.model_id, defaultdict(int))
        for e in r.entities:
            g = groups[(e.category, e.surface)]
            g[0] += 1
            g[1].add(r.model_id)
            per_model[e.category] += 1
            grand += 1
    by_cat = defaultdict(list)
    for (cat, surface), (count, models) in groups.items():
        by_cat[cat].append(SummaryEntry(surface, count, tuple(sorted(models))))
    categories = {
        cat: tuple(sorted(by_cat[cat], key=lambda e: (-e.count, e.surface)))
        for cat in sorted(by_cat, key=category_rank)
    }
    return IntegratedSummary(
        categories,
        {m: _ordered_counts(c) for m, c in totals.items()},
        grand,
    )


@dataclass(frozen=True)
class DocumentResult:
    doc_id: str
    source_uri: str
    settings_fingerprint: str
    created_at: str
    model_results: tuple
    summary: IntegratedSummary

    def __post_init__(self):
        object.__setattr__(self, "model_results", tuple(self.model_results))

    def mentions(self):
        for r in self.model_results:
            yield from r.entities

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "doc_id": self.doc_id,
            "source_uri": self.source_uri,
            "settings_fingerprint": self.settings_fingerprint,
            "created_at": self.created_at,
            "models": [r.to_dict() for r in self.model_results],
            "summary": self.summary.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "DocumentResult":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported result schema {d.get('schema_version')!r}")
        return cls(
            doc_id=d["doc_id"],
            source_uri=d.get("source_uri", ""),
            settings_fingerprint=d.get("settings_fingerprint", ""),
            created_at=d.get("created_at", ""),
            model_results=tuple(ModelRunResult.from_dict(m) for m in d["models"]),
            summary=IntegratedSummary.from_dict(d["summary"]),
        )


# -- statistics ---------------------------------------------------------------

@dataclass(frozen=True)
class ModelStats:
    documents: int = 0
    exec_time_us: int = 0
    categories: Mapping[Category, int] = field(default_factory=dict)
    failures: int = 0
    dropped_spans: int = 0

    @property
    def total_exec_time_s(self) -> float:
        return self.exec_time_us / 1e6

    @property
    def entities(self) -> int:
        return sum(self.categories.values())

    def merge(self, other: "ModelStats") -> "ModelStats":
        cats = dict(self.categories)
        for c, n in other.categories.items():
            cats[c] = cats.get(c, 0) + n
        return ModelStats(
            self.documents + other.documents,
            self.exec_time_us + other.exec_time_us,
            _ordered_counts(cats),
            self.failures + other.failures,
            self.dropped_spans + other.dropped_spans,
        )

    def to_dict(self) -> dict:
        return {
            "documents": self.documents,
            "total_exec_time_s": self.total_exec_time_s,
            "entities": self.entities,
            "categories": {c.value: n for c, n in self.categories.items()},
            "failures": self.failures,
            "dropped_spans": self.dropped_spans,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelStats":
        return cls(
            d.get("documents", 0),
            round(d.get("total_exec_time_s", 0.0) * 1e6),
            _ordered_counts({Category.parse(c): n for c, n in d.get("categories", {}).items()}),
            d.get("failures", 0),
            d.get("dropped_spans", 0),
        )


@dataclass(frozen=True)
class RunStatistics:
    documents: int = 0
    models: Mapping[str, ModelStats] = field(default_factory=dict)

    def merge(self, other: "RunStatistics") -> "RunStatistics":
        models = dict(self.models)
        for m, s in other.models.items():
            models[m] = models[m].merge(s) if m in models else s
        return RunStatistics(self.documents + other.documents, dict(sorted(models.items())))

    def category_counts(self) -> dict:
        out = defaultdict(int)
        for s in self.models.values():
            for c, n in s.categories.items():
                out[c] += n
        return _ordered_counts(out)

    def to_dict(self) -> dict:
        return {"documents": self.documents,
                "models": {m: s.to_dict() for m, s in self.models.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunStatistics":
        return cls(d.get("documents", 0),
                   {m: ModelStats.from_dict(s) for m, s in sorted(d.get("models", {}).items())})


def stats_for(result: DocumentResult) -> RunStatistics:
    """Statistics contributed by a single document result."""
    per_model = {}
    for r in result.model_results:
        counts = defaultdict(int)
        for e in r.entities:
            counts[e.category] += 1
        s = ModelStats(1, round(r.exec_time_s * 1e6), _ordered_counts(counts),
                       0 if r.ok else 1, r.dropped_spans)
        # a model listed in two blocks counts the document once
        if r.model_id in per_model:
            s = replace(per_model[r.model_id].merge(s), documents=1)
        per_model[r.model_id] = s
    return RunStatistics(1, dict(sorted(per_model.items())))


def accumulate_stats(stats: RunStatistics, doc_result: Optional[DocumentResult]) -> RunStatistics:
    """Fold one document result into ``stats`` (pure; order-insensitive)."""
    if doc_result is None or not doc_result.model_results:
        return stats
    return stats.merge(stats_for(doc_result))
