"""Dictionary-based recognition on token boundaries (leftmost-longest)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..categories import Category
from ..errors import GazetteerError, MissingResource, UnknownLabel
from ..model import RawMention
from ..textkit import tokenize
from .lexicon import data_path, parse_tsv

BUILTIN = "builtin"


def normalize_phrase(phrase: str) -> str:
    return " ".join(phrase.split())


@dataclass(frozen=True, eq=False)
class Gazetteer:
    entries: Mapping[str, Category]
    case_sensitive: bool = True
    name: str = "gazetteer"
    _trie: dict = field(init=False, repr=False)

    def __post_init__(self):
        clean = {}
        for phrase, cat in self.entries.items():
            norm = normalize_phrase(phrase)
            if not norm:
                raise GazetteerError(f"{self.name}: empty phrase")
            cat = cat if isinstance(cat, Category) else Category.parse(cat)
            if clean.get(norm, cat) != cat:
                raise GazetteerError(f"{self.name}: {norm!r} maps to {clean[norm]} and {cat}")
            clean[norm] = cat
        object.__setattr__(self, "entries", clean)
        object.__setattr__(self, "_trie", self._build())

    def fold(self, s: str) -> str:
        return s if self.case_sensitive else s.casefold()

    def _build(self) -> dict:
        # trie keyed by (whitespace before token?, folded token surface);
        # terminal nodes keep the phrases ending there under the key None
        root = {}
        for phrase in self.entries:
            node = root
            prev_end = None
            for tok in tokenize(phrase):
                key = (prev_end is not None and tok.start > prev_end, self.fold(tok.surface))
                node = node.setdefault(key, {})
                prev_end = tok.end
            node.setdefault(None, []).append(phrase)
        return root

    def with_entry(self, phrase: str, category: Category) -> "Gazetteer":
        entries = dict(self.entries)
        entries[phrase] = category
        return Gazetteer(entries, self.case_sensitive, self.name)

    def __len__(self):
        return len(self.entries)


def load_gazetteer(path, case_sensitive: bool = True, name: str = None) -> Gazetteer:
    """Read a ``phrase<TAB>CATEGORY`` file."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            rows = list(parse_tsv(fh, str(path)))
    except FileNotFoundError:
        raise MissingResource(f"gazetteer file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise GazetteerError(f"{path}: not UTF-8 ({exc})") from exc
    entries = {}
    for phrase, label in rows:
        try:
            cat = Category.parse(label.upper())
        except UnknownLabel:
            raise GazetteerError(f"{path}: unknown category {label!r} for {phrase!r}") from None
        norm = normalize_phrase(phrase)
        if entries.get(norm, cat) != cat:
            raise GazetteerError(f"{path}: {norm!r} listed under two categories")
        entries[norm] = cat
    return Gazetteer(entries, case_sensitive, name or path.stem)


def load_gazetteers(specs, base_dir=None) -> tuple:
    """Load gazetteers named in settings; ``"builtin"`` selects the bundled demo lexicon."""
    out = []
    for spec in specs:
        if spec == BUILTIN:
            out.append(load_gazetteer(data_path("demo_gazetteer.tsv"), name="builtin"))
            continue
        p = Path(spec)
        if not p.is_absolute() and base_dir:
            p = Path(base_dir) / p
        out.append(load_gazetteer(p))
    return tuple(out)


def gazetteer_annotate(text: str, g: Gazetteer) -> list:
    """All leftmost-longest, non-overlapping phrase matches of ``g`` in ``text``.

    Matches start and end on token boundaries; a space inside a phrase
    matches any whitespace run in the text.
    """
    tokens = tokenize(text)
    folded = [g.fold(t.surface) for t in tokens]
    root = g._trie
    out = []
    i = 0
    n = len(tokens)
    while i < n:
        node = root.get((False, folded[i]))
        best = None
        j = i
        while node is not None:
            if None in node:
                best = (j, node[None])
            j += 1
            if j >= n:
                break
            node = node.get((tokens[j].start > tokens[j - 1].end, folded[j]))
        if best is None:
            i += 1
            continue
        last, phrases = best
        phrase = min(phrases)
        start, end = tokens[i].start, tokens[last].end
        out.append(RawMention(text[start:end], g.entries[phrase], start, end, 1.0))
        i = last + 1
    return out
