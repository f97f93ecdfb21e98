"""Word accuracy, corpus BLEU, throughput benchmarking and comparison reports."""
from __future__ import annotations

import json
import math
import statistics
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from .corpus import is_punct_token

Tokens = Sequence[str]


class EvalError(ValueError):
    pass


def word_accuracy(
    hypotheses: Sequence[Tokens],
    references: Sequence[Tokens],
    exclude_punct: bool = False,
    case_sensitive: bool = True,
) -> float:
    """Percentage of reference positions restored correctly.

    Tokens are compared position by position up to the shorter length. Every
    missing or surplus hypothesis token counts as one error, and surplus
    tokens are added to the denominator.
    """
    if len(hypotheses) != len(references):
        raise EvalError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    correct = total = 0
    for hyp, ref in zip(hypotheses, references):
        hyp, ref = list(hyp), list(ref)
        if exclude_punct:
            if len(hyp) == len(ref):
                keep = [k for k, r in enumerate(ref) if not is_punct_token(r)]
                hyp = [hyp[k] for k in keep]
                ref = [ref[k] for k in keep]
            else:
                hyp = [t for t in hyp if not is_punct_token(t)]
                ref = [t for t in ref if not is_punct_token(t)]
        if not case_sensitive:
            hyp = [t.lower() for t in hyp]
            ref = [t.lower() for t in ref]
        correct += sum(h == r for h, r in zip(hyp, ref))
        total += len(ref) + max(0, len(hyp) - len(ref))
    if total == 0:
        return 100.0
    return 100.0 * correct / total


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: Sequence[Tokens], references: Sequence[Tokens], max_n: int = 4) -> float:
    """Corpus BLEU (single reference, uniform weights, no smoothing), 0-100.

    Orders for which the hypotheses contain no n-grams at all (every sentence
    shorter than n) have an undefined precision and are left out of the mean.
    """
    if len(hypotheses) != len(references):
        raise EvalError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise EvalError("BLEU of an empty corpus is undefined")
    matches = [0] * max_n
    possible = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp, ref = list(hyp), list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            possible[n - 1] += max(0, len(hyp) - n + 1)
    orders = [(m, p) for m, p in zip(matches, possible) if p > 0]
    if hyp_len == 0 or any(m == 0 for m, _ in orders):
        return 0.0
    log_p = sum(math.log(m / p) for m, p in orders) / len(orders)
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_p)


@dataclass
class Throughput:
    sentences_per_second: float
    p50_ms: float
    p95_ms: float
    sentences: int
    seconds: float


def benchmark_throughput(system: Callable[[Tokens], Tokens], corpus: Sequence[Tokens], warmup: int = 5) -> Throughput:
    """Single-stream wall-clock timing; the first ``warmup`` calls are not measured."""
    corpus = list(corpus)
    if not corpus:
        raise EvalError("cannot benchmark on an empty corpus")
    for sent in corpus[:warmup]:
        system(sent)
    lat = []
    clock = time.perf_counter
    t0 = clock()
    for sent in corpus:
        s = clock()
        system(sent)
        lat.append(clock() - s)
    total = clock() - t0
    lat.sort()
    q = statistics.quantiles(lat, n=100, method="inclusive") if len(lat) > 1 else [lat[0]] * 99
    return Throughput(
        sentences_per_second=len(corpus) / max(total, 1e-12),
        p50_ms=1000.0 * q[49],
        p95_ms=1000.0 * q[94],
        sentences=len(corpus),
        seconds=total,
    )


@dataclass
class SystemRow:
    name: str
    accuracy: float
    bleu: float
    sentences_per_second: float | None = None
    train_seconds: float | None = None
    p50_ms: float | None = None
    p95_ms: float | None = None


@dataclass
class EvalReport:
    rows: list[SystemRow]
    corpus: str = ""
    config: dict = field(default_factory=dict)

    TIMING_FIELDS = ("sentences_per_second", "train_seconds", "p50_ms", "p95_ms")

    def to_dict(self, include_timing: bool = True) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            if not include_timing:
                for k in self.TIMING_FIELDS:
                    d.pop(k)
            rows.append(d)
        return {"corpus": self.corpus, "config": self.config, "systems": rows}

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    def to_text(self) -> str:
        head = ("system", "accuracy", "bleu", "train (s)", "test (sent/s)")
        body = []
        for r in self.rows:
            body.append((
                r.name,
                f"{r.accuracy:.2f}",
                f"{r.bleu:.2f}",
                "-" if r.train_seconds is None else f"{r.train_seconds:.1f}",
                "-" if r.sentences_per_second is None else f"{r.sentences_per_second:.1f}",
            ))
        widths = [max(len(row[i]) for row in [head, *body]) for i in range(len(head))]
        fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
        lines = [fmt(head), "  ".join("-" * w for w in widths)] + [fmt(r) for r in body]
        return "\n".join(lines) + "\n"

    def render(self, fmt: str = "text") -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "text":
            return self.to_text()
        raise EvalError(f"unknown report format {fmt!r}")


@dataclass
class System:
    name: str
    restore: Callable[[Tokens], Tokens]
    train_seconds: float | None = None


def compare_report(
    systems: Sequence[System],
    sources: Sequence[Tokens],
    references: Sequence[Tokens],
    corpus_name: str = "",
    config: dict | None = None,
    timing: bool = True,
    warmup: int = 5,
    exclude_punct: bool = False,
) -> EvalReport:
    """Restore ``sources`` with every system and score against ``references``."""
    rows = []
    for sys_ in systems:
        hyps = [list(sys_.restore(s)) for s in sources]
        row = SystemRow(sys_.name, word_accuracy(hyps, references, exclude_punct), bleu(hyps, references),
                        train_seconds=sys_.train_seconds)
        if timing:
            tp = benchmark_throughput(sys_.restore, sources, warmup)
            row.sentences_per_second, row.p50_ms, row.p95_ms = tp.sentences_per_second, tp.p50_ms, tp.p95_ms
        rows.append(row)
    return EvalReport(rows, corpus_name, dict(config or {}))
