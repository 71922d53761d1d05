"""Offset-preserving tokenization, sentence segmentation and mention context.

All offsets are indices into the Python ``str`` (Unicode scalar values),
0-based and end-exclusive.
"""

from __future__ import annotations

import bisect
import re
import unicodedata
from dataclasses import dataclass
from typing import Optional

from .errors import BoundsError
from .model import ContextPolicy

WORD, NUMBER, PUNCTUATION, SYMBOL = "word", "number", "punctuation", "symbol"

WORD_JOINERS = frozenset("'’-")
NUMBER_JOINERS = frozenset(",.")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int
    kind: str


@dataclass(frozen=True)
class SentenceSpan:
    start: int
    end: int


def is_letter(ch: str) -> bool:
    return ch.isalpha() or unicodedata.category(ch).startswith("M")


def is_digit(ch: str) -> bool:
    return ch.isdecimal()


def _other_kind(ch: str) -> str:
    return PUNCTUATION if unicodedata.category(ch).startswith("P") else SYMBOL


def tokenize(text: str) -> list:
    """Split ``text`` into word, number, punctuation and symbol tokens.

    Words are letter runs with internal apostrophes/hyphens, numbers are
    digit runs with internal ``,``/``.`` between digits; every other
    non-whitespace character is a token on its own.
    """
    tokens = []
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        j = i + 1
        if is_letter(ch):
            while j < n:
                if is_letter(text[j]):
                    j += 1
                elif text[j] in WORD_JOINERS and j + 1 < n and is_letter(text[j + 1]):
                    j += 2
                else:
                    break
            kind = WORD
        elif is_digit(ch):
            while j < n:
                if is_digit(text[j]):
                    j += 1
                elif text[j] in NUMBER_JOINERS and j + 1 < n and is_digit(text[j + 1]):
                    j += 2
                else:
                    break
            kind = NUMBER
        else:
            kind = _other_kind(ch)
        tokens.append(Token(text[i:j], i, j, kind))
        i = j
    return tokens


ABBREVIATIONS = frozenset({
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.", "mt.",
    "e.g.", "i.e.", "vs.", "cf.", "no.", "inc.", "ltd.", "co.", "corp.",
})
_INITIALS = re.compile(r"(?:[^\W\d_]\.)+\Z")
_TERMINATORS = frozenset(".!?")
_CLOSERS = frozenset("\"')]}”’»")


def _is_abbreviation(text: str, dot: int) -> bool:
    """True when the '.' at ``dot`` ends a known abbreviation or an initial."""
    k = dot
    while k > 0 and not text[k - 1].isspace():
        k -= 1
    word = text[k:dot + 1]
    word = word.lstrip("\"'([{“‘«")
    if word.lower() in ABBREVIATIONS:
        return True
    return bool(_INITIALS.match(word)) and word[0].isupper()


def split_sentences(text: str) -> list:
    """Rule-based sentence spans; leading/trailing whitespace is excluded."""
    spans = []
    n = len(text)
    start = None
    i = 0
    while i < n:
        ch = text[i]
        if start is None:
            if ch.isspace():
                i += 1
                continue
            start = i
        if ch in _TERMINATORS:
            j = i
            while j < n and text[j] in _TERMINATORS:
                j += 1
            lone_dot = text[i:j] == "."
            while j < n and text[j] in _CLOSERS:
                j += 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            at_break = j == n or (k > j and (k == n or text[k].isupper()))
            if at_break and not (lone_dot and _is_abbreviation(text, i)):
                spans.append(SentenceSpan(start, j))
                start = None
                i = k
                continue
            i = j
            continue
        i += 1
    if start is not None:
        end = n
        while end > start and text[end - 1].isspace():
            end -= 1
        spans.append(SentenceSpan(start, end))
    return spans


class ContextExtractor:
    """Context lookup for many mentions of one text (sentences computed once)."""

    def __init__(self, text: str, policy: Optional[ContextPolicy] = None):
        self.text = text
        self.policy = policy or ContextPolicy()
        self._sentences = None
        self._starts = None

    @property
    def sentences(self) -> list:
        if self._sentences is None:
            self._sentences = split_sentences(self.text)
            self._starts = [s.start for s in self._sentences]
        return self._sentences

    def _window(self, start: int, end: int, chars: int) -> str:
        return self.text[max(0, start - chars):min(len(self.text), end + chars)]

    def __call__(self, start: int, end: int) -> str:
        if not 0 <= start < end <= len(self.text):
            raise BoundsError(f"invalid span ({start}, {end}) for text of length {len(self.text)}")
        policy = self.policy
        if policy.kind == "window":
            return self._window(start, end, policy.chars)
        sents = self.sentences
        # first sentence ending after start, last sentence starting before end
        lo = max(bisect.bisect_right(self._starts, start) - 1, 0)
        if lo < len(sents) and sents[lo].end <= start:
            lo += 1
        hi = bisect.bisect_left(self._starts, end) - 1
        if lo > hi or lo >= len(sents):
            return self._window(start, end, policy.fallback_chars)
        c0 = min(start, sents[lo].start)
        c1 = max(end, sents[hi].end)
        if c1 - c0 > policy.max_sentence:
            return self._window(start, end, policy.fallback_chars)
        return self.text[c0:c1]


def extract_context(text: str, start: int, end: int, policy: Optional[ContextPolicy] = None) -> str:
    """Sentence (or clamped window) around ``text[start:end]``; always contains it."""
    return ContextExtractor(text, policy)(start, end)
