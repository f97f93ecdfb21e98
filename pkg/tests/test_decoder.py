import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import monotone_oracle
from vndiac.corpus import ParallelCorpus, SentencePair
from vndiac.diacritics import strip_text
from vndiac.decoder import (
    DecodeGuardError, DecoderConfig, brute_force_decode, decode, decode_nbest, monotone_decode, permissible,
)
from vndiac.lm import BOS, EOS, UNK, NGramModel, train_lm
from vndiac.phrase_model import train_phrase_table

WORDS = ["đảm", "đam", "dâm", "đang", "đãng", "cô", "co", "ấy", "rất", "rát"]


def random_instance(seed, n_train=12):
    rng = random.Random(seed)
    vocab = rng.sample(WORDS, rng.randint(3, len(WORDS)))
    sents = [[rng.choice(vocab) for _ in range(rng.randint(1, 6))] for _ in range(n_train)]
    corpus = ParallelCorpus([SentencePair.from_target(s) for s in sents])
    table = train_phrase_table(corpus, 2)
    lm = train_lm(sents, rng.choice([1, 2, 3]))
    src = [p for p in rng.choice(corpus.sources)]
    # sometimes a fresh source, possibly with an unseen token
    if rng.random() < 0.5:
        pool = sorted({t for s in corpus.sources for t in s}) + ["xyz"]
        src = [rng.choice(pool) for _ in range(rng.randint(1, 6))]
    return src, table, lm


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0, 1, 2]))
def test_beam_matches_brute_force(seed, limit):
    src, table, lm = random_instance(seed)
    cfg = DecoderConfig(beam_width=50, max_phrase_len=2, distortion_limit=limit, max_candidates=None)
    (out, score), = decode_nbest(src, table, lm, cfg, 1)
    bf_out, bf_score = brute_force_decode(src, table, lm, cfg)
    assert score == pytest.approx(bf_score, abs=1e-9)
    # exact score ties between candidates may be broken differently by roundoff
    assert sorted(strip_text(t) for t in out) == sorted(strip_text(t) for t in bf_out) == sorted(src)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.5, 2.0))
def test_monotone_matches_independent_oracle(seed, omega):
    src, table, lm = random_instance(seed)
    cfg = DecoderConfig(beam_width=50, max_phrase_len=2, omega=omega, max_candidates=None)

    def options(i, j):
        if j - i > 2:
            return []
        es = table.lookup(tuple(src[i:j]))
        if not es and j - i == 1:
            return [((src[i],), 0.0, 0.0)]
        return [(e.target, math.log(e.phi), math.log(e.phi_rev)) for e in es]

    ref_score, ref_out = monotone_oracle(src, options, lm.score_sequence, omega)
    out, score = monotone_decode(src, table, lm, cfg)
    assert score == pytest.approx(ref_score, abs=1e-9)
    assert [strip_text(t) for t in out] == [strip_text(t) for t in ref_out]
    b_out, b_score = decode_nbest(src, table, lm, cfg, 1)[0]
    assert b_score == pytest.approx(ref_score, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_output_strips_to_source(seed):
    src, table, lm = random_instance(seed)
    out = decode(src, table, lm, DecoderConfig(distortion_limit=0))
    assert len(out) == len(src)
    assert [strip_text(o) for o in out] == src


def toy_unigram(probs):
    lp = {(w,): math.log(p) for w, p in probs.items()}
    lp[(EOS,)] = 0.0
    lp[(UNK,)] = -math.inf
    lp[(BOS,)] = -math.inf
    return NGramModel(1, lp, {})


def test_lm_picks_candidate():
    corpus = ParallelCorpus([SentencePair.from_target(["đảm"]), SentencePair.from_target(["dâm"])])
    table = train_phrase_table(corpus, 1)
    lm = toy_unigram({"đảm": 0.6, "dâm": 0.4})
    assert decode(["dam"], table, lm) == ["đảm"]
    assert brute_force_decode(["dam"], table, lm)[0] == ["đảm"]
    lm = toy_unigram({"đảm": 0.4, "dâm": 0.6})
    assert decode(["dam"], table, lm) == ["dâm"]
    nb = decode_nbest(["dam"], table, lm, DecoderConfig(), 5)
    assert [o for o, _ in nb] == [["dâm"], ["đảm"]]
    assert nb[0][1] == pytest.approx(math.log(0.5) + math.log(0.6))
    assert nb[1][1] == pytest.approx(math.log(0.5) + math.log(0.4))


def test_phrase_segmentation_chosen():
    # single-token entries prefer dâm/đãng; only the two-token phrase yields đảm đang
    sents = [["dâm"]] * 3 + [["đãng"]] * 3 + [["đảm", "đang", "x"]]
    corpus = ParallelCorpus([SentencePair.from_target(s) for s in sents])
    table = train_phrase_table(corpus, 2)
    lm = train_lm([["đảm", "đang"]] * 5 + [["dâm"], ["đãng"]], 2)
    out, score = brute_force_decode(["dam", "dang"], table, lm)
    assert out == ["đảm", "đang"]
    assert decode(["dam", "dang"], table, lm) == out


def test_copy_through_and_empty():
    corpus = ParallelCorpus([SentencePair.from_target(["cô"])])
    table = train_phrase_table(corpus, 1)
    lm = train_lm([["cô"]], 2)
    assert decode(["qwerty", "uiop"], table, lm) == ["qwerty", "uiop"]
    assert decode([], table, lm) == []
    assert decode_nbest([], table, lm, DecoderConfig(), 3)[0][0] == []


def test_nbest_first_is_decode_and_distinct():
    src, table, lm = random_instance(7)
    cfg = DecoderConfig(beam_width=50)
    nb = decode_nbest(src, table, lm, cfg, 10)
    assert nb[0][0] == decode(src, table, lm, cfg)
    outs = [tuple(o) for o, _ in nb]
    assert len(set(outs)) == len(outs)
    assert all(a[1] >= b[1] for a, b in zip(nb, nb[1:]))


def test_permissible_rule():
    # monotone: only the next position
    assert permissible(0b0, 0, 1, -1, 3, 0)
    assert not permissible(0b0, 1, 2, -1, 3, 0)
    # limit 2: skipping one position is allowed if the gap stays reachable
    assert permissible(0b0, 1, 2, -1, 3, 2)
    assert not permissible(0b0, 2, 3, -1, 4, 1)
    # covering up to the end with a gap behind is fine as long as j - gap <= limit
    assert not permissible(0b0, 1, 4, -1, 4, 2)


def test_distortion_allows_swap():
    # swapped order is only reachable with distortion, and the LM strongly prefers it
    sents = [["cô"], ["ấy"]]
    corpus = ParallelCorpus([SentencePair.from_target(s) for s in sents])
    table = train_phrase_table(corpus, 1)
    lm = train_lm([["ấy", "cô"]] * 20, 2)
    cfg0 = DecoderConfig(distortion_limit=0)
    cfg2 = DecoderConfig(distortion_limit=2, distortion_base=0.9)
    assert decode(["co", "ay"], table, lm, cfg0) == ["cô", "ấy"]
    assert decode(["co", "ay"], table, lm, cfg2) == ["ấy", "cô"]
    assert brute_force_decode(["co", "ay"], table, lm, cfg2)[0] == ["ấy", "cô"]


def test_guards():
    src, table, lm = random_instance(3)
    with pytest.raises(DecodeGuardError, match="oracle bound"):
        brute_force_decode(["co"] * 9, table, lm)
    with pytest.raises(DecodeGuardError, match="fan-out"):
        brute_force_decode(["co"], table, lm, DecoderConfig(max_candidates=None), max_fanout=0)


@pytest.mark.parametrize("kw", [dict(beam_width=0), dict(omega=0), dict(distortion_limit=-1), dict(max_phrase_len=0),
                                dict(distortion_base=1.5)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        DecoderConfig(**kw)


def test_omega_is_neutral_for_equal_length():
    # every output has the source length, so omega shifts all scores equally
    src, table, lm = random_instance(11)
    a = decode_nbest(src, table, lm, DecoderConfig(omega=1.0), 1)[0]
    b = decode_nbest(src, table, lm, DecoderConfig(omega=2.0), 1)[0]
    assert a[0] == b[0]
    assert b[1] - a[1] == pytest.approx(len(src) * math.log(2.0))


def test_desk_restoration_of_training_sentences(desk_split, desk_models):
    table, lm = desk_models
    train = desk_split[0]
    hits = total = 0
    for p in train.pairs[:100]:
        out = decode(p.source, table, lm)
        hits += sum(a == b for a, b in zip(out, p.target))
        total += len(p.target)
    assert hits / total >= 0.99
