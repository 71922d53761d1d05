"""scikit-learn compatible estimator around the recognizers.

``EntityRecognizer`` takes raw strings as samples. ``fit`` can learn a
gazetteer from gold mentions, ``predict`` returns one mention list per
text, ``transform`` yields per-category counts as a feature matrix and
``score`` is micro F1 under exact span matching.
"""

from __future__ import annotations

from collections import Counter, defaultdict

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .adapters import run_external_backend
from .bench import evaluate
from .categories import CATEGORY_ORDER, Category, category_rank, normalize_category
from .errors import ConfigError, NerkitError
from .ingestion import DocumentRecord
from .model import ContextPolicy, RawMention, default_registry
from .recognizers.backends import Resources, check_native, run_native_backend
from .recognizers.gazetteer import Gazetteer, load_gazetteers


def _as_mention(m) -> RawMention:
    if isinstance(m, tuple):
        start, end, label = m[:3]
        return RawMention("", normalize_category(label) if isinstance(label, str) else label, start, end)
    return m


def learn_gazetteer(X, y, case_sensitive: bool = True) -> Gazetteer:
    """Phrase -> most frequent gold category (ties go to the canonical order)."""
    votes = defaultdict(Counter)
    for text, mentions in zip(X, y):
        for m in map(_as_mention, mentions):
            phrase = " ".join(text[m.start:m.end].split())
            if phrase:
                votes[phrase if case_sensitive else phrase.casefold()][m.category] += 1
    entries = {p: min(c, key=lambda cat: (-c[cat], category_rank(cat))) for p, c in votes.items()}
    return Gazetteer(entries, case_sensitive, "learned")


class EntityRecognizer(TransformerMixin, BaseEstimator):
    """Named entity recognizer over plain strings.

    Parameters mirror run settings: ``model_id`` picks a native or external
    model, ``gazetteers`` lists lexicon files (or ``"builtin"``), and
    ``learn_from_gold`` adds a gazetteer compiled from ``y`` during fit.
    """

    def __init__(self, model_id="native/combined", gazetteers=("builtin",), learn_from_gold=True,
                 case_sensitive=True, context_chars=None, strict_labels=False,
                 endpoint=None, transport=None):
        self.model_id = model_id
        self.gazetteers = gazetteers
        self.learn_from_gold = learn_from_gold
        self.case_sensitive = case_sensitive
        self.context_chars = context_chars
        self.strict_labels = strict_labels
        self.endpoint = endpoint
        self.transport = transport

    def fit(self, X, y=None):
        X = list(X)
        lexicons = list(load_gazetteers(self.gazetteers or ()))
        self.n_learned_ = 0
        if y is not None and self.learn_from_gold:
            y = list(y)
            if len(y) != len(X):
                raise ValueError(f"X has {len(X)} samples but y has {len(y)}")
            learned = learn_gazetteer(X, y, self.case_sensitive)
            if len(learned):
                lexicons.insert(0, learned)
            self.n_learned_ = len(learned)
        registry = default_registry(endpoints={self.model_id: self.endpoint} if self.endpoint else None)
        if self.model_id not in registry:
            raise ConfigError(f"unknown model id {self.model_id!r}")
        self.descriptor_ = registry[self.model_id]
        self.resources_ = Resources(gazetteers=tuple(lexicons), transport=self.transport)
        if self.descriptor_.kind == "native":
            check_native(self.model_id, self.resources_)
        self.policy_ = ContextPolicy.window(self.context_chars) if self.context_chars else ContextPolicy()
        return self

    def _run(self, i, text):
        doc = DocumentRecord(f"sample-{i}", text)
        if self.descriptor_.kind == "native":
            r = run_native_backend(self.model_id, doc, self.resources_, self.policy_)
        else:
            r = run_external_backend(self.descriptor_, doc, strict_labels=self.strict_labels,
                                     policy=self.policy_, transport=self.resources_.transport)
        if r.error:
            raise NerkitError(f"{self.model_id} failed on sample {i}: {r.error}")
        return list(r.entities)

    def predict(self, X) -> list:
        check_is_fitted(self, "resources_")
        return [self._run(i, text) for i, text in enumerate(X)]

    def transform(self, X) -> np.ndarray:
        """Mention counts per category, columns in canonical category order."""
        rows = []
        for mentions in self.predict(X):
            c = Counter(m.category for m in mentions)
            rows.append([c[cat] for cat in CATEGORY_ORDER])
        return np.asarray(rows, dtype=np.int64).reshape(len(rows), len(CATEGORY_ORDER))

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.asarray([c.value for c in CATEGORY_ORDER], dtype=object)

    def score(self, X, y) -> float:
        # spans are shifted per sample so mentions from different texts never match
        X = list(X)
        pred, gold, base = [], [], 0
        for text, found, expected in zip(X, self.predict(X), y):
            pred.extend(_shift(m, base) for m in found)
            gold.extend(_shift(_as_mention(m), base) for m in expected)
            base += len(text) + 1
        return evaluate(pred, gold).f1


def _shift(m, base: int) -> RawMention:
    cat = m.category if isinstance(m.category, Category) else Category.parse(m.category)
    return RawMention(m.surface, cat, m.start + base, m.end + base)
