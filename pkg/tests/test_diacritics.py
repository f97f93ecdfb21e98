import random
import unicodedata

import pytest
from hypothesis import given, strategies as st

from vndiac.diacritics import (
    STANDARD_MAP, TONES, VOWEL_SHAPES, AmbiguityReport, DiacriticMap, DiacriticMapError, Variant,
    ambiguity_stats, build_candidate_index, candidates, dump_map, has_diacritics, load_map, strip_char, strip_text,
)

ALL_LOWER = [c for vs in STANDARD_MAP.entries.values() for c in vs]


def test_inventory_size():
    # 12 vowel shapes x 6 tones, plus d and đ
    n_shapes = sum(len(s) for s in VOWEL_SHAPES.values())
    assert n_shapes == 12
    assert len(ALL_LOWER) == n_shapes * len(TONES) + 2 == 74
    assert len(set(ALL_LOWER)) == 74


@pytest.mark.parametrize("c, base", [("đ", "d"), ("a", "a"), ("Ễ", "E"), ("ự", "u"), ("Ỷ", "Y"), ("Đ", "D"), ("ằ", "a")])
def test_strip_char_examples(c, base):
    assert strip_char(c) == base


def test_every_variant_round_trips_through_metadata():
    for ch in ALL_LOWER:
        v = STANDARD_MAP.meta[ch]
        assert strip_char(ch) == v.base
        assert STANDARD_MAP.compose(v.base, v.shape, v.tone) == ch
        assert v.type1 == (v.shape != "plain")
        up = ch.upper()
        assert len(up) == 1 and strip_char(up) == v.base.upper()


def test_all_precomposed():
    for ch in ALL_LOWER:
        assert unicodedata.normalize("NFC", ch) == ch


def test_strip_text_examples():
    assert strip_text("Cô ấy rất đảm đang") == "Co ay rat dam dang"
    assert strip_text("xin chao") == "xin chao"


MIXED = st.text(alphabet=st.sampled_from(ALL_LOWER + [c.upper() for c in ALL_LOWER] + list("bcghklmnpqrstvx .,1ñç")))


@given(MIXED)
def test_strip_idempotent_and_length_preserving(s):
    once = strip_text(s)
    assert strip_text(once) == once
    assert len(once) == len(s)
    assert not has_diacritics(once)


@given(st.text())
def test_strip_leaves_foreign_characters(s):
    out = strip_text(s)
    assert len(out) == len(s)
    for a, b in zip(s, out):
        assert a == b or a.lower() in STANDARD_MAP.reverse


def test_candidates():
    lex = {"đảm", "dâm", "đam", "cô"}
    assert candidates("dam", lex) == {"đảm", "dâm", "đam"}
    assert candidates("qwerty", lex) == {"qwerty"}
    assert candidates("đã", lex) == {"đã"}
    assert candidates("đã", lex | {"đã"}) == {"đã"}
    idx = build_candidate_index(lex)
    assert candidates("dam", idx) == candidates("dam", lex)


def test_ambiguity_examples():
    r = ambiguity_stats(["đảm đang", "dâm đãng"])
    assert r.pct_stripped_forms_ambiguous == 100.0
    assert r.ambiguous_forms == ["dam", "dang"]
    assert ambiguity_stats(["xin chao"]).pct_tokens_with_diacritics == 0.0
    r = ambiguity_stats(["cô cô cô"])
    assert r.candidate_counts == {"co": 1}
    assert r.pct_types_with_diacritics == 100.0 and r.pct_stripped_forms_ambiguous == 0.0


def test_ambiguity_ignores_case_and_punctuation():
    r = ambiguity_stats(["Cô cô , ."])
    assert r.candidate_counts == {"co": 1}
    assert r.pct_tokens_with_diacritics == 100.0


def test_ambiguity_empty_corpus():
    with pytest.raises(ValueError):
        ambiguity_stats([])
    with pytest.raises(ValueError):
        ambiguity_stats([" . , "])


def test_map_file_round_trip(tmp_path):
    p = tmp_path / "map.tsv"
    dump_map(STANDARD_MAP, p)
    m = load_map(p)
    assert m.reverse == STANDARD_MAP.reverse
    assert m.strip_text("Đảm ĐANG") == "Dam DANG"


def test_map_rejects_conflicts():
    with pytest.raises(DiacriticMapError):
        DiacriticMap.from_variants([Variant("á", "a", "plain", "acute"), Variant("á", "e", "plain", "acute")])
    with pytest.raises(DiacriticMapError):
        DiacriticMap.from_variants([Variant("á", "a", "plain", "acute")])


def test_random_strings_bulk():
    rng = random.Random(0)
    alphabet = ALL_LOWER + [c.upper() for c in ALL_LOWER] + list("bcdghklmnpqrstvx ")
    for _ in range(1000):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        assert strip_text(strip_text(s)) == strip_text(s)
