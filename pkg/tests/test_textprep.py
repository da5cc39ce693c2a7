import re

from hypothesis import given, strategies as st

from qbug.textprep import (
    StopwordList,
    TokenStream,
    bigrams,
    contains_phrase,
    count_phrase,
    default_negations,
    default_stopwords,
    detect_negation,
    normalize,
    read_word_list,
    remove_stopwords,
    stem_tokens,
    tokenize,
)

text_st = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=80
)


class TestNormalize:
    def test_empty(self):
        assert normalize("", "", []) == ""

    def test_punctuation_and_case(self):
        assert normalize("KeyError!", "in transpile()", ["see #13732"]) == "keyerror in transpile see 13732"

    def test_intra_word_hyphen_kept(self):
        assert normalize("T-gate", "", []) == "t-gate"

    def test_edge_and_repeated_hyphens(self):
        assert normalize("-x- a--b --", "", []) == "x a-b"

    def test_underscore_splits(self):
        assert normalize("snake_case", "", []) == "snake case"

    @given(text_st, text_st, st.lists(text_st, max_size=3))
    def test_idempotent(self, t, b, c):
        once = normalize(t, b, c)
        assert normalize(once) == once

    @given(text_st, text_st)
    def test_tokens_are_clean(self, t, b):
        for tok in tokenize(normalize(t, b)).tokens:
            assert tok
            assert tok == tok.lower()
            assert re.fullmatch(r"[^\W_]+(?:-[^\W_]+)*", tok)


class TestTokenize:
    def test_empty(self):
        assert tokenize("").tokens == ()

    def test_duplicates_preserved(self):
        assert list(tokenize("qubit qubit decoherence")) == ["qubit", "qubit", "decoherence"]

    def test_extra_spaces(self):
        assert tokenize("a b  c").tokens == ("a", "b", "c")
        assert tokenize("a b  c").source_len == 6


class TestStopwords:
    def test_default_list_size(self):
        sw = default_stopwords()
        assert len(sw) == 175
        assert all(w == w.lower() for w in sw.words)

    def test_removal(self):
        ts = tokenize("the circuit is broken")
        assert remove_stopwords(ts, default_stopwords()).tokens == ("circuit", "broken")

    def test_empty_and_disjoint(self):
        sw = default_stopwords()
        assert remove_stopwords(tokenize(""), sw).tokens == ()
        ts = tokenize("qubit transpiler")
        assert remove_stopwords(ts, sw).tokens == ts.tokens

    def test_uppercase_rejected(self):
        import pytest

        with pytest.raises(ValueError):
            StopwordList(frozenset({"The"}))

    def test_read_word_list_comments(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("# header\nFoo\n\nbar # trailing\n", encoding="utf-8")
        assert read_word_list(p) == ["foo", "bar"]


class TestBigrams:
    def test_examples(self):
        assert bigrams([]) == []
        assert bigrams(["quantum"]) == []
        assert bigrams(tokenize("quantum error correction")) == ["quantum error", "error correction"]

    @given(st.lists(st.text(alphabet="abc", min_size=1, max_size=3), max_size=12))
    def test_length(self, toks):
        assert len(bigrams(toks)) == max(0, len(toks) - 1)


class TestNegation:
    def test_examples(self):
        neg = default_negations()
        assert detect_negation("this is not a quantum bug", neg)
        assert detect_negation("not classical", neg)
        assert not detect_negation("quantum bug in transpiler", neg)

    def test_token_boundary(self):
        assert not detect_negation("cannot quantumly", ["not quantum"])
        assert not contains_phrase("abc", "")


def test_count_phrase_overlapping():
    assert count_phrase(["a", "a", "a"], ["a", "a"]) == 2
    assert count_phrase(["x", "y"], []) == 0


def test_stem_tokens_keeps_length():
    ts = TokenStream(("measurement", "qubits"), 20)
    assert stem_tokens(ts).tokens == ("measur", "qubit")
    assert stem_tokens(ts).source_len == 20
