from hypothesis import given, settings
from hypothesis import strategies as st

from wikiupdate.segment import abbreviations, segment_sentences
from wikiupdate.text import collapse_whitespace, normalize_text, normalize_title, tokenize


def texts(s):
    return [x.text for x in segment_sentences(s)]


def test_normalize_text_folds_case_width_and_space():
    assert normalize_text("  Ｔｏｍ\tKRISTENSSON \n") == "tom kristensson"


def test_tokenize_splits_on_non_alphanumeric_runs():
    assert tokenize("Rally-cross, 2020's champion!") == ["rally", "cross", "2020", "s", "champion"]
    assert tokenize("a_b") == ["a", "b"]
    assert tokenize("...") == []


def test_tokenize_keeps_non_ascii_letters():
    assert tokenize("Mads Østberg – Citroën") == ["mads", "østberg", "citroën"]


def test_normalize_title():
    assert normalize_title("secretary_of_State") == "Secretary of State"
    assert normalize_title("  iPod ") == "IPod"
    assert normalize_title("") == ""


def test_single_long_sentence():
    s = ("Tom Krister Kristensson (born 30 April 1991) is a Swedish rally driver, "
         "who drives in the Junior World Championship.")
    assert texts(s) == [s]


def test_two_declaratives():
    assert texts("She won. He lost.") == ["She won.", "He lost."]


def test_no_split_after_initialism_or_initial():
    s = "She held several positions in the U.S. State Department during the George W. Bush administration."
    assert texts(s) == [s]


def test_abbreviation_list_blocks_split():
    assert texts("Mr. Smith met Dr. Jones. They talked.") == ["Mr. Smith met Dr. Jones.", "They talked."]
    assert "etc." in abbreviations() and "Jr." in abbreviations()


def test_boundary_needs_capital_digit_or_quote():
    assert texts("It rose. 2020 was busy.") == ["It rose.", "2020 was busy."]
    assert texts('He said no. "Fine," she said.') == ["He said no.", '"Fine," she said.']
    assert texts("Version 2.5 shipped. it was lowercase.") == ["Version 2.5 shipped. it was lowercase."]


def test_closing_quote_and_bracket_stay_with_sentence():
    assert texts('She said "go." Then left.') == ['She said "go."', "Then left."]
    assert texts("It ended (finally.) Next came more.") == ["It ended (finally.)", "Next came more."]


def test_no_split_inside_link_markup():
    s = "He visited [[St. Louis. Missouri]] in May. Then he left."
    assert texts(s) == ["He visited [[St. Louis. Missouri]] in May.", "Then he left."]


def test_split_before_link():
    assert texts("He won. [[Jan Solans]] lost.") == ["He won.", "[[Jan Solans]] lost."]


def test_whitespace_only_is_empty():
    assert segment_sentences(" \n\t ") == []
    assert segment_sentences("") == []


def test_indices_are_positions():
    assert [s.index for s in segment_sentences("A b. C d! E f?")] == [0, 1, 2]


PARAGRAPH = st.lists(
    st.one_of(
        st.sampled_from(["Mr.", "U.S.", "W.", "etc.", "No.", "end.", "Why?", "Yes!", "2020.", '"Quote."', "(aside.)"]),
        st.from_regex(r"[A-Za-z0-9]{1,8}", fullmatch=True),
        st.sampled_from([" ", "  ", "\n", "\t"]),
        st.text(min_size=1, max_size=4),
    ),
    max_size=30,
).map("".join)


@settings(max_examples=400)
@given(PARAGRAPH)
def test_reconstruction(p):
    assert " ".join(texts(p)) == collapse_whitespace(p)


@settings(max_examples=200)
@given(PARAGRAPH)
def test_segmentation_is_deterministic_and_nonempty(p):
    first = segment_sentences(p)
    assert first == segment_sentences(p)
    assert all(s.text.strip() for s in first)
