"""Native backends: dispatch a native model id to the grammars/gazetteers."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from ..errors import MissingResource, UnknownModel
from ..model import ContextPolicy, EntityMention
from ..results import ModelRunResult
from ..textkit import ContextExtractor
from .gazetteer import gazetteer_annotate
from .patterns import PRECEDENCE, recognize_numeric, recognize_temporal, resolve_overlaps

NEEDS_GAZETTEERS = frozenset({"native/gazetteer", "native/combined"})


@dataclass
class Resources:
    """Everything backends need besides the document itself.

    ``backends`` maps extra native model ids (e.g. the gold oracle) to
    callables ``doc -> list[RawMention]``. ``transport``/``sleep`` are
    injection points for the HTTP adapter.
    """

    gazetteers: tuple = ()
    backends: Mapping[str, Callable] = field(default_factory=dict)
    transport: object = None
    timeout: float = 30.0
    retries: int = 3
    sleep: Optional[Callable[[float], None]] = None
    token: Optional[str] = None


def _patterns(text, resources):
    return recognize_numeric(text) + recognize_temporal(text)


def _gazetteers(text, resources):
    found = []
    for g in resources.gazetteers:
        found.extend(gazetteer_annotate(text, g))
    return found


_RECOGNIZERS = {
    "native/patterns": (_patterns,),
    "native/gazetteer": (_gazetteers,),
    "native/combined": (_patterns, _gazetteers),
}


def merge_mentions(mentions) -> list:
    """Non-overlapping merge: longer span, then earlier start, then grammar precedence."""
    pos = {id(m): i for i, m in enumerate(mentions)}
    rank = len(PRECEDENCE)
    return resolve_overlaps(list(mentions), key=lambda m: (
        -(m.end - m.start), m.start, PRECEDENCE.get(m.category, rank), pos[id(m)]))


def is_native_runnable(model_id: str, resources: Resources) -> bool:
    return model_id in _RECOGNIZERS or model_id in resources.backends


def check_native(model_id: str, resources: Resources):
    if not is_native_runnable(model_id, resources):
        raise UnknownModel(f"no native backend named {model_id!r}")
    if model_id in NEEDS_GAZETTEERS and not resources.gazetteers:
        raise MissingResource(f"{model_id} needs at least one gazetteer")


def raw_native_mentions(model_id: str, text: str, doc, resources: Resources) -> list:
    if model_id in resources.backends:
        return list(resources.backends[model_id](doc))
    found = []
    for fn in _RECOGNIZERS[model_id]:
        found.extend(fn(text, resources))
    return merge_mentions(found)


def run_native_backend(model_id: str, doc, resources: Optional[Resources] = None,
                       policy: Optional[ContextPolicy] = None,
                       context: Optional[ContextExtractor] = None) -> ModelRunResult:
    """Run a native recognizer over ``doc`` and attach contexts."""
    resources = resources or Resources()
    check_native(model_id, resources)
    t0 = time.perf_counter()
    context = context or ContextExtractor(doc.text, policy)
    raw = raw_native_mentions(model_id, doc.text, doc, resources)
    entities = tuple(
        EntityMention(m.surface, m.category, m.start, m.end, context(m.start, m.end), model_id, m.score)
        for m in raw
    )
    return ModelRunResult(model_id, time.perf_counter() - t0, entities)
