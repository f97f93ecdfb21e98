"""Phrase-based noisy-channel decoding.

A derivation translates source phrases f_1..f_N (in some order) into target
phrases e_1..e_N and is scored in log space as

    sum_i [ w_phi log phi(f_i|e_i) + w_rev log phi_rev(e_i|f_i)
            + w_d |start_i - end_{i-1} - 1| log delta ]
    + w_lm log p_LM(e) + w_len len(e) log omega

With the default weights (phi_rev aside) this is log p(f|e) p(e) omega^len(e)
with an exponential distortion model d = delta^|jump|.

Reordering is permissible when each jump is within the distortion limit and
the first uncovered position stays reachable from the new phrase end, which
guarantees every partial hypothesis can still be completed. The beam search,
the monotone dynamic program and the brute-force oracle all share this rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .lm import BOS, EOS, NGramModel
from .phrase_model import PhraseTable


class DecodeGuardError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    omega: float = 1.0
    beam_width: int = 20
    max_phrase_len: int = 4
    distortion_limit: int = 0
    distortion_base: float = 0.5
    w_lm: float = 1.0
    w_phi: float = 1.0
    w_phi_rev: float = 1.0
    w_distortion: float = 1.0
    w_length: float = 1.0
    max_candidates: int | None = 20  # per source phrase, best phi_rev first

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.distortion_limit < 0:
            raise ValueError("distortion limit must be >= 0")
        if self.max_phrase_len < 1:
            raise ValueError("max phrase length must be >= 1")
        if not 0 < self.distortion_base <= 1:
            raise ValueError("distortion base must be in (0, 1]")


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def span_options(source: Sequence[str], table: PhraseTable, config: DecoderConfig):
    """{(i, j): [(target phrase, static score)]} for every source span with candidates.

    Single tokens without a table entry are copied through with phi = phi_rev = 1.
    """
    n = len(source)
    len_bonus = config.w_length * math.log(config.omega)
    opts = {}
    max_len = min(config.max_phrase_len, table.max_len or 1)
    for i in range(n):
        for j in range(i + 1, min(n, i + max_len) + 1):
            entries = table.lookup(tuple(source[i:j]))
            if config.max_candidates is not None:
                entries = entries[: config.max_candidates]
            if entries:
                opts[(i, j)] = [
                    (
                        e.target,
                        config.w_phi * _log(e.phi) + config.w_phi_rev * _log(e.phi_rev) + len(e.target) * len_bonus,
                    )
                    for e in entries
                ]
        if (i, i + 1) not in opts:
            opts[(i, i + 1)] = [((source[i],), len_bonus)]
    return opts


def permissible(coverage: int, i: int, j: int, last_end: int, n: int, limit: int) -> bool:
    """May span [i, j) follow a phrase ending at ``last_end`` given ``coverage``?"""
    if abs(i - last_end - 1) > limit:
        return False
    new_cov = coverage | (((1 << (j - i)) - 1) << i)
    full = (1 << n) - 1
    if new_cov == full:
        return True
    gap = (~new_cov & full & -(~new_cov & full)).bit_length() - 1  # lowest uncovered position
    return gap > j - 1 or j - gap <= limit


class Hyp(NamedTuple):
    score: float
    out: tuple  # target tokens so far, in translation order
    coverage: int
    last_end: int
    lm_state: tuple


def _rank(h):
    return (-h.score, h.out)


def decode_nbest(source, table: PhraseTable, lm: NGramModel, config: DecoderConfig = DecoderConfig(), n: int = 1):
    """Beam search; returns up to ``n`` distinct (target tokens, log score), best first."""
    if n < 1:
        raise ValueError("n must be >= 1")
    source = list(source)
    N = len(source)
    if N == 0:
        return [([], config.w_lm * lm.end_score(lm.begin()))]
    opts = span_options(source, table, config)
    spans_from = [[(j, opts[(i, j)]) for j in range(i + 1, N + 1) if (i, j) in opts] for i in range(N)]
    log_delta = math.log(config.distortion_base)
    full = (1 << N) - 1
    limit = config.distortion_limit
    w_lm, w_d = config.w_lm, config.w_distortion * log_delta

    # stacks[k]: recombination key -> list of hyps (up to n with distinct outputs)
    stacks: list[dict] = [dict() for _ in range(N + 1)]
    start = Hyp(0.0, (), 0, -1, lm.begin())
    stacks[0][(0, -1, start.lm_state)] = [start]
    score_word = lm.score_word

    for k in range(N):
        hyps = [h for group in stacks[k].values() for h in group]
        hyps.sort(key=_rank)
        for h in hyps[: config.beam_width]:
            cov = h.coverage
            for i in range(N):
                if cov >> i & 1:
                    continue
                for j, cands in spans_from[i]:
                    if (cov >> i) & ((1 << (j - i)) - 1):
                        break
                    if not permissible(cov, i, j, h.last_end, N, limit):
                        continue
                    jump = abs(i - h.last_end - 1)
                    base = h.score + w_d * jump if jump else h.score
                    new_cov = cov | (((1 << (j - i)) - 1) << i)
                    done = new_cov == full
                    target_stack = stacks[k + j - i]
                    for tgt, static in cands:
                        state = h.lm_state
                        lm_score = 0.0
                        for w in tgt:
                            state, lp = score_word(state, w)
                            lm_score += lp
                        if done:
                            lm_score += lm.end_score(state)
                        new = Hyp(base + static + w_lm * lm_score, h.out + tgt, new_cov, j - 1, state)
                        _add(target_stack, (new_cov, j - 1, state), new, n)

    final = {}
    for group in stacks[N].values():
        for h in group:
            if h.out not in final or _rank(h) < _rank(final[h.out]):
                final[h.out] = h
    ranked = sorted(final.values(), key=_rank)[:n]
    return [(list(h.out), h.score) for h in ranked]


def _add(stack: dict, key, hyp: Hyp, n: int) -> None:
    group = stack.get(key)
    if group is None:
        stack[key] = [hyp]
        return
    for idx, other in enumerate(group):
        if other.out == hyp.out:
            if _rank(hyp) < _rank(other):
                group[idx] = hyp
            return
    group.append(hyp)
    if len(group) > n:
        group.sort(key=_rank)
        del group[n:]


def decode(source, table: PhraseTable, lm: NGramModel, config: DecoderConfig = DecoderConfig()) -> list[str]:
    return decode_nbest(source, table, lm, config, 1)[0][0]


def monotone_decode(source, table: PhraseTable, lm: NGramModel, config: DecoderConfig = DecoderConfig()):
    """Exact Viterbi over (position, LM state) for monotone translation. No pruning."""
    source = list(source)
    N = len(source)
    opts = span_options(source, table, config)
    best: list[dict] = [dict() for _ in range(N + 1)]
    best[0][lm.begin()] = (0.0, ())
    for i in range(N):
        for state, (score, out) in sorted(best[i].items(), key=lambda kv: (-kv[1][0], kv[1][1])):
            for j in range(i + 1, N + 1):
                if (i, j) not in opts:
                    continue
                for tgt, static in opts[(i, j)]:
                    st = state
                    lm_score = 0.0
                    for w in tgt:
                        st, lp = lm.score_word(st, w)
                        lm_score += lp
                    if j == N:
                        lm_score += lm.end_score(st)
                    cand = (score + static + config.w_lm * lm_score, out + tgt)
                    cur = best[j].get(st)
                    if cur is None or (-cand[0], cand[1]) < (-cur[0], cur[1]):
                        best[j][st] = cand
    if N == 0:
        return [], config.w_lm * lm.end_score(lm.begin())
    score, out = min(best[N].values(), key=lambda v: (-v[0], v[1]))
    return list(out), score


def brute_force_decode(
    source,
    table: PhraseTable,
    lm: NGramModel,
    config: DecoderConfig = DecoderConfig(),
    max_source_len: int = 8,
    max_fanout: int = 10,
):
    """Exhaustive argmax over segmentations, candidates and permissible orders.

    Test oracle: every derivation's LM term is computed from the complete
    target sentence with explicit n-gram contexts, independently of the
    incremental state handling in the beam search.
    """
    source = list(source)
    N = len(source)
    if N > max_source_len:
        raise DecodeGuardError(f"source length {N} exceeds the oracle bound of {max_source_len}")
    cands = {}
    for i in range(N):
        for j in range(i + 1, min(N, i + config.max_phrase_len) + 1):
            entries = table.lookup(tuple(source[i:j]))
            if config.max_candidates is not None:
                entries = entries[: config.max_candidates]
            if entries:
                cands[(i, j)] = [(e.target, math.log(e.phi), math.log(e.phi_rev)) for e in entries]
        if (i, i + 1) not in cands:
            cands[(i, i + 1)] = [((source[i],), 0.0, 0.0)]
    for span, c in cands.items():
        if len(c) > max_fanout:
            raise DecodeGuardError(f"span {span} has {len(c)} candidates, over the oracle fan-out bound of {max_fanout}")

    lm_cache: dict[tuple, float] = {}

    def lm_total(target):
        v = lm_cache.get(target)
        if v is None:
            hist = [BOS]
            v = 0.0
            for w in target:
                v += lm.ngram_prob(w, hist)
                hist.append(w)
            v += lm.ngram_prob(EOS, hist)
            lm_cache[target] = v
        return v

    log_omega = math.log(config.omega)
    log_delta = math.log(config.distortion_base)
    best = None  # (score, target)

    def leaf(target, channel):
        nonlocal best
        score = channel + config.w_lm * lm_total(target) + config.w_length * len(target) * log_omega
        if best is None or (-score, target) < (-best[0], best[1]):
            best = (score, target)

    def expand(coverage, last_end, target, channel):
        if coverage == (1 << N) - 1:
            leaf(target, channel)
            return
        for (i, j), options in cands.items():
            mask = ((1 << (j - i)) - 1) << i
            if coverage & mask or not permissible(coverage, i, j, last_end, N, config.distortion_limit):
                continue
            jump = abs(i - last_end - 1)
            for tgt, lphi, lrev in options:
                ch = channel + config.w_phi * lphi + config.w_phi_rev * lrev + config.w_distortion * jump * log_delta
                expand(coverage | mask, j - 1, target + tgt, ch)

    expand(0, -1, (), 0.0)
    return list(best[1]), best[0]
