"""Canonical entity categories and raw-label normalization."""

from __future__ import annotations

from enum import Enum
from typing import Mapping, Optional, Union

from .errors import UnknownLabel


class Category(str, Enum):
    PERSON = "PERSON"
    NORP = "NORP"
    FAC = "FAC"
    ORG = "ORG"
    GPE = "GPE"
    LOCATION = "LOCATION"
    PRODUCT = "PRODUCT"
    EVENT = "EVENT"
    WORK_OF_ART = "WORK_OF_ART"
    LAW = "LAW"
    LANGUAGE = "LANGUAGE"
    DATE = "DATE"
    TIME = "TIME"
    PERCENT = "PERCENT"
    MONEY = "MONEY"
    QUANTITY = "QUANTITY"
    ORDINAL = "ORDINAL"
    CARDINAL = "CARDINAL"
    # normalization target for labels outside the 18 named categories
    MISCELLANEOUS = "MISCELLANEOUS"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Category":
        """Parse a canonical serialized name (exact, uppercase)."""
        try:
            return cls(name)
        except ValueError:
            raise UnknownLabel(f"not a canonical category: {name!r}") from None


CATEGORY_ORDER = tuple(Category)
_RANK = {c: i for i, c in enumerate(CATEGORY_ORDER)}


def category_rank(c: Category) -> int:
    return _RANK[c]


DEFAULT_ALIASES: dict[str, Category] = {
    # CoNLL family
    "PER": Category.PERSON,
    "LOC": Category.LOCATION,
    "ORG": Category.ORG,
    "MISC": Category.MISCELLANEOUS,
    # OntoNotes / spaCy family (identity entries below cover the rest)
    "GPE": Category.GPE,
    "NORP": Category.NORP,
    # common spellings emitted by other taggers
    "PERSONS": Category.PERSON,
    "ORGANIZATION": Category.ORG,
    "ORGANISATION": Category.ORG,
    "FACILITY": Category.FAC,
    "GSP": Category.GPE,
}
DEFAULT_ALIASES.update({c.value: c for c in Category})

LabelMap = Mapping[str, Union[Category, str]]


def _coerce(value) -> Category:
    if isinstance(value, Category):
        return value
    return Category.parse(str(value).strip().upper())


def normalize_category(raw_label: str, alias_map: Optional[LabelMap] = None,
                       strict: bool = False) -> Category:
    """Map a backend's raw label onto a canonical :class:`Category`.

    Lookup is case-insensitive: first ``alias_map``, then the built-in
    default table. Unmatched labels become MISCELLANEOUS unless ``strict``.
    """
    key = raw_label.strip().upper() if isinstance(raw_label, str) else ""
    if not key:
        raise ValueError("raw label must be non-empty")
    if alias_map:
        for k, v in alias_map.items():
            if k.strip().upper() == key:
                return _coerce(v)
    hit = DEFAULT_ALIASES.get(key)
    if hit is not None:
        return hit
    if strict:
        raise UnknownLabel(f"no category for label {raw_label!r}")
    return Category.MISCELLANEOUS
