"""Regex grammars for numeric and temporal categories.

Each grammar produces candidate spans; overlaps are resolved greedily so
every character belongs to at most one mention.
"""

from __future__ import annotations

import re
from functools import lru_cache

from ..categories import Category
from ..model import RawMention
from .lexicon import read_lexicon

# PERCENT > MONEY > QUANTITY > DATE/TIME > ORDINAL > CARDINAL
PRECEDENCE = {
    Category.PERCENT: 0,
    Category.MONEY: 1,
    Category.QUANTITY: 2,
    Category.DATE: 3,
    Category.TIME: 4,
    Category.ORDINAL: 5,
    Category.CARDINAL: 6,
}

# number boundaries: no word char and no "digit + separator" immediately outside
LB = r"(?<!\w)(?<!\d[.,])"
RB = r"(?!\w)(?![.,]\d)"
SP = r"[ \t\u00a0]+"

NUM = r"\d+(?:[.,]\d+)*"
NUMBER_WORDS = (
    "zero one two three four five six seven eight nine ten eleven twelve thirteen "
    "fourteen fifteen sixteen seventeen eighteen nineteen twenty"
).split()
SCALE_WORDS = ("hundred", "thousand", "million", "billion")
ORDINAL_WORDS = (
    "first second third fourth fifth sixth seventh eighth ninth tenth eleventh twelfth "
    "thirteenth fourteenth fifteenth sixteenth seventeenth eighteenth nineteenth twentieth"
).split()

# unit tokens that are also common English words: only matched when attached ("5in")
ATTACHED_ONLY_UNITS = frozenset({"in"})


def _alt(words) -> str:
    return "|".join(re.escape(w) for w in sorted(set(words), key=lambda w: (-len(w), w)))


NUMERAL = (rf"(?:{NUM}|(?i:{_alt(NUMBER_WORDS)})|(?i:{_alt(SCALE_WORDS)}))"
           rf"(?:{SP}(?i:{_alt(SCALE_WORDS)}))*")


@lru_cache(maxsize=None)
def numeric_grammar() -> tuple:
    """Compiled ``(category, regex)`` pairs built from the unit/currency lexicons."""
    units = [tok for tok, _kind in read_lexicon("units.tsv")]
    money = read_lexicon("currencies.tsv")
    codes = [tok for tok, _ in money if tok.isupper()]
    words = [tok for tok, _ in money if not tok.isupper()]
    spaced_units = [u for u in units if u.lower() not in ATTACHED_ONLY_UNITS]
    attached_units = [u for u in units if u.lower() in ATTACHED_ONLY_UNITS]
    unit_re = rf"(?:(?:{SP})?(?i:{_alt(spaced_units)})"
    if attached_units:
        unit_re += rf"|(?i:{_alt(attached_units)})"
    unit_re += ")"
    rules = [
        (Category.PERCENT, rf"{LB}{NUMERAL}(?:[ \u00a0]?%|{SP}(?i:percent|per cent|pct){RB})"),
        (Category.MONEY, rf"(?<!\w)(?:(?:US|AU|NZ|HK|A|C|S)?\$|[€£¥]){NUMERAL}{RB}"),
        (Category.MONEY, rf"{LB}(?:{_alt(codes)})(?:{SP})?{NUMERAL}{RB}"),
        (Category.MONEY, rf"{LB}{NUMERAL}{SP}(?:(?i:{_alt(words)})|{_alt(codes)}){RB}"),
        (Category.QUANTITY, rf"{LB}{NUMERAL}{unit_re}{RB}"),
        (Category.ORDINAL, rf"{LB}(?:(?i:{_alt(ORDINAL_WORDS)})|\d+(?i:st|nd|rd|th)){RB}"),
        (Category.CARDINAL, rf"{LB}{NUMERAL}{RB}"),
    ]
    return tuple((cat, re.compile(rx)) for cat, rx in rules)


MONTHS = ("January February March April May June July August September October "
          "November December").split()
MONTH_ABBREVS = "Jan Feb Mar Apr Jun Jul Aug Sep Sept Oct Nov Dec".split()
WEEKDAYS = "Monday Tuesday Wednesday Thursday Friday Saturday Sunday".split()

MONTH = rf"(?:{_alt(MONTHS)}|(?:{_alt(MONTH_ABBREVS)})\.?)"
DAY = r"(?:[12]\d|3[01]|0?[1-9])(?i:st|nd|rd|th)?"
YEAR = r"[12]\d{3}"
MERIDIEM = r"(?i:a\.m\.|p\.m\.|am|pm)"
_WB = r"(?<!\w)"
_WE = r"(?!\w)"

TEMPORAL_RULES = (
    (Category.DATE, rf"{LB}{DAY}{SP}(?:of{SP})?{MONTH}(?:,?{SP}{YEAR})?{RB}"),
    (Category.DATE, rf"{_WB}{MONTH}{SP}{DAY}(?:,?{SP}{YEAR})?{RB}"),
    (Category.DATE, rf"{_WB}{MONTH},?{SP}{YEAR}{RB}"),
    (Category.DATE, rf"{LB}(?P<d1>\d{{1,2}})(?P<sep>[/.-])(?P<d2>\d{{1,2}})(?P=sep)\d{{2}}(?:\d{{2}})?{RB}"),
    (Category.DATE, rf"{LB}{YEAR}(?P<sep>[/.-])(?P<m>\d{{1,2}})(?P=sep)(?P<d>\d{{1,2}}){RB}"),
    (Category.DATE, rf"{LB}[12]\d{{2}}0'?s{_WE}"),
    (Category.DATE, rf"{LB}{YEAR}{RB}"),
    (Category.DATE, rf"{_WB}(?:{_alt(WEEKDAYS)}){_WE}"),
    (Category.DATE, rf"{_WB}(?i:today|yesterday|tomorrow){_WE}"),
    (Category.TIME, rf"{LB}(?:[01]?\d|2[0-3]):[0-5]\d(?::[0-5]\d)?(?:(?:{SP})?{MERIDIEM})?(?!\w)(?![.,:]\d)"),
    (Category.TIME, rf"{LB}(?:1[0-2]|0?[1-9])(?:{SP})?{MERIDIEM}(?!\w)"),
    (Category.TIME, rf"{_WB}(?i:noon|midnight){_WE}"),
)
_TEMPORAL = tuple((cat, re.compile(rx)) for cat, rx in TEMPORAL_RULES)


def _plausible_date(m: re.Match) -> bool:
    g = m.groupdict()
    if g.get("d1") is not None:
        a, b = int(g["d1"]), int(g["d2"])
        return 1 <= a <= 31 and 1 <= b <= 31 and min(a, b) <= 12
    if g.get("m") is not None:
        return 1 <= int(g["m"]) <= 12 and 1 <= int(g["d"]) <= 31
    return True


def resolve_overlaps(candidates, key) -> list:
    """Greedy non-overlapping selection in ``key`` order; result sorted by start."""
    if not candidates:
        return []
    limit = max(c.end for c in candidates)
    taken = bytearray(limit)
    chosen = []
    for c in sorted(candidates, key=key):
        if 1 in taken[c.start:c.end]:
            continue
        taken[c.start:c.end] = b"\x01" * (c.end - c.start)
        chosen.append(c)
    chosen.sort(key=lambda c: (c.start, c.end))
    return chosen


def _length_first(c: RawMention):
    return (-(c.end - c.start), PRECEDENCE[c.category], c.start)


def _scan(text, rules, check=None) -> list:
    found = []
    for cat, rx in rules:
        for m in rx.finditer(text):
            if check is not None and not check(m):
                continue
            found.append(RawMention(m.group(0), cat, m.start(), m.end(), 1.0))
    return found


def recognize_numeric(text: str) -> list:
    """PERCENT, MONEY, QUANTITY, ORDINAL and CARDINAL mentions in ``text``."""
    return resolve_overlaps(_scan(text, numeric_grammar()), _length_first)


def recognize_temporal(text: str) -> list:
    """DATE and TIME mentions in ``text``."""
    return resolve_overlaps(_scan(text, _TEMPORAL, _plausible_date), _length_first)
