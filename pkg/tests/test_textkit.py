import pytest
from hypothesis import given, strategies as st

from nerkit.errors import BoundsError
from nerkit.model import ContextPolicy
from nerkit.textkit import extract_context, split_sentences, tokenize

from oracles import oracle_tokens

# letters, decimal digits, joiners, punctuation, symbols and whitespace;
# no combining marks (the regex oracle does not model them)
ALPHABET = "abcXYZéßΩж0123456789٣'’-.,;:!?()\"$€%&@#+/ \t\n"
texts = st.text(alphabet=ALPHABET, max_size=80)


def as_tuples(tokens):
    return [(t.surface, t.start, t.end, t.kind) for t in tokens]


def test_empty():
    assert tokenize("") == []
    assert split_sentences("") == []


def test_hello_world():
    assert as_tuples(tokenize("Hello, world")) == [
        ("Hello", 0, 5, "word"), (",", 5, 6, "punctuation"), ("world", 7, 12, "word")]


def test_cafe_euro():
    assert as_tuples(tokenize("café 5€")) == [
        ("café", 0, 4, "word"), ("5", 5, 6, "number"), ("€", 6, 7, "symbol")]


def test_joiners():
    assert [t.surface for t in tokenize("rock-n-roll isn't 1,000.5 a--b 3.")] == [
        "rock-n-roll", "isn't", "1,000.5", "a", "-", "-", "b", "3", "."]


def test_combining_mark_stays_in_word():
    text = "café ok"
    assert [t.surface for t in tokenize(text)] == ["café", "ok"]


@given(texts)
def test_tokenizer_matches_regex_oracle(text):
    assert as_tuples(tokenize(text)) == oracle_tokens(text)


@given(st.text(max_size=120))
def test_token_coverage_and_fidelity(text):
    covered = [0] * len(text)
    prev_end = 0
    for t in tokenize(text):
        assert text[t.start:t.end] == t.surface
        assert t.start >= prev_end
        prev_end = t.end
        for i in range(t.start, t.end):
            covered[i] += 1
    for i, ch in enumerate(text):
        assert covered[i] == (0 if ch.isspace() else 1)


@pytest.mark.parametrize("text, spans", [
    ("A b. C d.", [(0, 4), (5, 9)]),
    ("Dr. Smith left.", [(0, 15)]),
    ("It rained! Then? Sun.", [(0, 10), (11, 16), (17, 21)]),
    ("See J. R. Tolkien. Next", [(0, 18), (19, 23)]),
    ("He said \"Go.\" She went.", [(0, 13), (14, 23)]),
    ("version 2.5 is out", [(0, 18)]),
    ("  trailing space   ", [(2, 16)]),
])
def test_sentences(text, spans):
    assert [(s.start, s.end) for s in split_sentences(text)] == spans


@given(st.text(alphabet="ab AB.!?\n\"Dr", max_size=80))
def test_sentence_coverage(text):
    covered = [0] * len(text)
    prev_end = 0
    for s in split_sentences(text):
        assert prev_end <= s.start < s.end
        assert not text[s.start].isspace() and not text[s.end - 1].isspace()
        prev_end = s.end
        for i in range(s.start, s.end):
            covered[i] += 1
    for i, ch in enumerate(text):
        if not ch.isspace():
            assert covered[i] == 1


def test_sentence_context():
    text = "A b. C Canberra d."
    start = text.index("Canberra")
    assert extract_context(text, start, start + 8) == "C Canberra d."


def test_window_context():
    assert extract_context("Canberra", 0, 8, ContextPolicy.window(100)) == "Canberra"
    assert extract_context("abcdef", 2, 4, ContextPolicy.window(1)) == "bcde"


def test_long_sentence_falls_back_to_window():
    text = "word " * 200 + "Canberra " + "word " * 200
    start = text.index("Canberra")
    ctx = extract_context(text, start, start + 8)
    assert ctx == text[start - 100:start + 108]


def test_span_across_sentences():
    text = "One. Two. Three."
    assert extract_context(text, 2, 7) == "One. Two."


def test_bad_span():
    with pytest.raises(BoundsError):
        extract_context("abc", 2, 2)
    with pytest.raises(BoundsError):
        extract_context("abc", 0, 4)


@given(st.text(min_size=1, max_size=150).flatmap(
    lambda t: st.tuples(st.just(t), st.integers(0, len(t) - 1), st.integers(1, len(t)))))
def test_context_contains_surface(args):
    text, a, b = args
    start, end = min(a, b - 1), max(a + 1, b)
    surface = text[start:end]
    assert surface in extract_context(text, start, end)
    assert surface in extract_context(text, start, end, ContextPolicy.window(3))
