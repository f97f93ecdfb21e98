"""Backoff n-gram language model over diacritized tokens.

Two estimators share one storage layout (explicit n-gram log-probabilities
plus per-context backoff weights, i.e. the ARPA layout):

* ``kn``   interpolated Kneser-Ney with a single absolute discount;
* ``addk`` additive smoothing toward the next-lower order,
  ``p(w|h) = (c(hw) + k|V| p(w|h')) / (c(h) + k|V|)``; with ``k = 0`` this is
  plain relative frequency, which is handy for hand-checked tests but gives
  unseen events ``-inf``.

All log-probabilities are natural logs; the ARPA files use log10.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
_LN10 = math.log(10.0)
_ARPA_NEG = -99.0


class LMError(ValueError):
    pass


@dataclass(frozen=True)
class Smoothing:
    kind: str = "kn"  # kn | addk
    discount: float = 0.75
    k: float = 0.01
    min_count: int = 1  # vocabulary cutoff; rarer tokens train as <unk>

    def __post_init__(self):
        if self.kind not in ("kn", "addk"):
            raise LMError(f"unknown smoothing {self.kind!r}")
        if self.kind == "kn" and not 0.0 < self.discount < 1.0:
            raise LMError("Kneser-Ney discount must be in (0, 1)")
        if self.kind == "addk" and self.k < 0:
            raise LMError("add-k constant must be >= 0")


class NGramModel:
    def __init__(self, order: int, logprobs: dict, backoffs: dict):
        self.order = order
        self.logprobs = logprobs  # ngram tuple -> ln p
        self.backoffs = backoffs  # context tuple -> ln backoff weight
        self.vocab = frozenset(g[0] for g in logprobs if len(g) == 1)
        # predicted vocabulary: everything except the begin sentinel
        self.words = sorted(self.vocab - {BOS})
        self._contexts = frozenset(backoffs)

    # -- queries ---------------------------------------------------------
    def _map(self, tok: str) -> str:
        return tok if tok in self.vocab else UNK

    def _lp(self, ctx: tuple, word: str) -> float:
        return _lookup(self.logprobs, self.backoffs, ctx, word)

    def ngram_prob(self, word: str, context: Sequence[str] = ()) -> float:
        """ln p(word | last order-1 tokens of context)."""
        n = self.order - 1
        ctx = tuple(self._map(t) for t in context[max(0, len(context) - n) :]) if n else ()
        return self._lp(ctx, self._map(word))

    def score_sequence(self, tokens: Sequence[str]) -> float:
        """ln p(tokens </s> | <s>)."""
        state = self.begin()
        total = 0.0
        for tok in tokens:
            state, lp = self.score_word(state, tok)
            total += lp
        return total + self.end_score(state)

    # -- incremental interface used by the decoder -----------------------
    def begin(self) -> tuple:
        return self._minimize((BOS,)) if self.order > 1 else ()

    def _minimize(self, state: tuple) -> tuple:
        # drop history the model cannot distinguish, so equal futures recombine
        while state and state not in self._contexts:
            state = state[1:]
        return state

    def score_word(self, state: tuple, word: str) -> tuple[tuple, float]:
        w = self._map(word)
        lp = self._lp(state, w)
        if self.order == 1:
            return (), lp
        nxt = (state + (w,))[-(self.order - 1) :]
        return self._minimize(nxt), lp

    def end_score(self, state: tuple) -> float:
        return self._lp(state, EOS)

    # -- diagnostics -----------------------------------------------------
    def contexts(self) -> list[tuple]:
        return sorted(self._contexts)

    def context_mass(self, context: Sequence[str]) -> float:
        """Total probability over the predicted vocabulary; 1 for a proper model."""
        return math.fsum(math.exp(self.ngram_prob(w, context)) for w in self.words)

    # -- construction ----------------------------------------------------
    @classmethod
    def uniform(cls, words: Iterable[str]) -> "NGramModel":
        vocab = set(words) | {EOS, UNK}
        lp = -math.log(len(vocab))
        probs = {(w,): lp for w in vocab}
        probs[(BOS,)] = -math.inf
        return cls(1, probs, {})

    # -- ARPA I/O --------------------------------------------------------
    def save_arpa(self, path: str | Path) -> None:
        by_order = defaultdict(list)
        for g in self.logprobs:
            by_order[len(g)].append(g)
        lines = ["\\data\\"]
        lines += [f"ngram {k}={len(by_order[k])}" for k in range(1, self.order + 1)]
        for k in range(1, self.order + 1):
            lines += ["", f"\\{k}-grams:"]
            for g in sorted(by_order[k]):
                p = self.logprobs[g]
                p10 = _ARPA_NEG if p == -math.inf else p / _LN10
                row = f"{p10!r}\t{' '.join(g)}"
                if g in self.backoffs:
                    row += f"\t{self.backoffs[g] / _LN10!r}"
                lines.append(row)
        lines += ["", "\\end\\", ""]
        Path(path).write_text("\n".join(lines), encoding="utf-8")

    @classmethod
    def load_arpa(cls, path: str | Path) -> "NGramModel":
        logprobs, backoffs = {}, {}
        order = 0
        section = None
        try:
            for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
                line = line.strip()
                if not line:
                    continue
                if line == "\\data\\" or line.startswith("ngram "):
                    section = "data"
                    if line.startswith("ngram "):
                        order = max(order, int(line[6:].split("=")[0]))
                    continue
                if line == "\\end\\":
                    break
                if line.startswith("\\") and line.endswith("-grams:"):
                    section = int(line[1:].split("-")[0])
                    continue
                if not isinstance(section, int):
                    raise LMError(f"{path}:{lineno}: n-gram line outside an n-gram section")
                parts = line.split("\t")
                if len(parts) == 1:
                    parts = line.split()
                    parts = [parts[0], " ".join(parts[1 : 1 + section])] + parts[1 + section :]
                g = tuple(parts[1].split())
                if len(g) != section:
                    raise LMError(f"{path}:{lineno}: expected a {section}-gram, got {parts[1]!r}")
                p10 = float(parts[0])
                logprobs[g] = -math.inf if p10 <= _ARPA_NEG else p10 * _LN10
                if len(parts) > 2:
                    backoffs[g] = float(parts[2]) * _LN10
        except (ValueError, IndexError) as e:
            if isinstance(e, LMError):
                raise
            raise LMError(f"{path}: malformed ARPA file ({e})") from e
        if not order or not logprobs:
            raise LMError(f"{path}: no \\data\\ header or no n-grams")
        return cls(order, logprobs, backoffs)


def _count(sentences: list[list[str]], order: int) -> list[Counter]:
    counts = [Counter() for _ in range(order + 1)]
    for sent in sentences:
        padded = [BOS] + sent + [EOS]
        for k in range(1, order + 1):
            ck = counts[k]
            for i in range(len(padded) - k + 1):
                g = tuple(padded[i : i + k])
                if g == (BOS,):
                    continue
                ck[g] += 1
    return counts


def _kn_adjusted(counts: list[Counter], order: int) -> list[Counter]:
    """Raw counts at the top order and for <s>-initial n-grams, continuation counts elsewhere."""
    adj = [Counter() for _ in range(order + 1)]
    adj[order] = Counter(counts[order])
    for k in range(order - 1, 0, -1):
        cont = Counter()
        for g in counts[k + 1]:
            cont[g[1:]] += 1
        ak = adj[k]
        for g, c in counts[k].items():
            ak[g] = c if g[0] == BOS else cont.get(g, 0)
        for g in [g for g, c in ak.items() if c == 0]:
            del ak[g]
    return adj


def train_lm(corpus: Iterable[Sequence[str]], order: int = 3, smoothing: Smoothing = Smoothing()) -> NGramModel:
    """Estimate an order-``order`` backoff model from token sequences."""
    if order < 1:
        raise LMError("order must be >= 1")
    sents = [list(s) for s in corpus]
    if not sents:
        raise LMError("cannot train a language model on an empty corpus")
    if smoothing.min_count > 1:
        freq = Counter(t for s in sents for t in s)
        sents = [[t if freq[t] >= smoothing.min_count else UNK for t in s] for s in sents]

    counts = _count(sents, order)
    words = {g[0] for g in counts[1]} | {UNK, EOS}
    words.discard(BOS)
    V = len(words)
    table = _kn_adjusted(counts, order) if smoothing.kind == "kn" else counts

    logprobs: dict[tuple, float] = {}
    backoffs: dict[tuple, float] = {}
    for k in range(1, order + 1):
        totals: dict[tuple, float] = defaultdict(float)
        types: dict[tuple, int] = defaultdict(int)
        for g, c in table[k].items():
            totals[g[:-1]] += c
            types[g[:-1]] += 1
        if smoothing.kind == "kn":
            D = smoothing.discount
            gamma = {h: D * types[h] / totals[h] for h in totals}
        else:
            kV = smoothing.k * V
            gamma = {h: kV / (totals[h] + kV) if totals[h] + kV > 0 else 0.0 for h in totals}

        current = {}
        for g, c in table[k].items():
            h = g[:-1]
            low = 1.0 / V if k == 1 else math.exp(_lookup(logprobs, backoffs, g[1:-1], g[-1]))
            if smoothing.kind == "kn":
                current[g] = (c - D) / totals[h] + gamma[h] * low
            else:
                current[g] = (c + kV * low) / (totals[h] + kV)
        if k == 1:
            unseen = gamma.get((), 1.0) / V
            for w in words:
                current.setdefault((w,), unseen)
        else:
            for h, gm in gamma.items():
                backoffs[h] = math.log(gm) if gm > 0 else -math.inf
        for g, p in current.items():
            logprobs[g] = math.log(p) if p > 0 else -math.inf

    logprobs[(BOS,)] = -math.inf
    return NGramModel(order, logprobs, backoffs)


def _lookup(logprobs: dict, backoffs: dict, ctx: tuple, word: str) -> float:
    total = 0.0
    while True:
        v = logprobs.get(ctx + (word,))
        if v is not None:
            return total + v
        if not ctx:
            return -math.inf
        total += backoffs.get(ctx, 0.0)
        ctx = ctx[1:]


def perplexity(model: NGramModel, corpus: Iterable[Sequence[str]]) -> float:
    """exp of the mean negative log-probability per token, </s> included."""
    total, n = 0.0, 0
    for sent in corpus:
        total += model.score_sequence(sent)
        n += len(sent) + 1
    if n == 0:
        raise LMError("cannot compute perplexity of an empty corpus")
    return math.exp(-total / n)
