"""Phrase extraction and relative-frequency phrase translation tables.

Stripping never moves, merges or splits tokens, so the word alignment of
every pair is the identity diagonal and we build it directly instead of
running an EM aligner. Extraction itself is the usual consistency-based
procedure and works for any alignment.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import ParallelCorpus, SentencePair
from .diacritics import strip_text

Phrase = tuple[str, ...]


class PhraseTableError(ValueError):
    pass


def align_monotone(pair: SentencePair | tuple[Sequence[str], Sequence[str]]) -> list[tuple[int, int]]:
    src, tgt = (pair.source, pair.target) if isinstance(pair, SentencePair) else pair
    if len(src) != len(tgt):
        raise PhraseTableError(f"cannot align {len(src)} source tokens to {len(tgt)} target tokens")
    return [(i, i) for i in range(len(src))]


def _consistent_spans(n_src: int, alignment: list[tuple[int, int]], max_len: int):
    """Yield (i, j, a, b): source span [i, j) consistent with target span [a, b)."""
    src_links = defaultdict(list)
    tgt_links = defaultdict(list)
    for s, t in alignment:
        src_links[s].append(t)
        tgt_links[t].append(s)
    for i in range(n_src):
        for j in range(i + 1, min(n_src, i + max_len) + 1):
            ts = [t for s in range(i, j) for t in src_links[s]]
            if not ts:
                continue
            a, b = min(ts), max(ts) + 1
            if b - a > max_len:
                continue
            if all(i <= s < j for t in range(a, b) for s in tgt_links[t]):
                yield i, j, a, b


def extract_phrases(corpus: ParallelCorpus | Iterable[SentencePair], max_len: int = 4) -> Counter:
    """Count every consistent (source span, target span) pair up to ``max_len`` tokens."""
    if max_len < 1:
        raise PhraseTableError("max phrase length must be >= 1")
    counts: Counter = Counter()
    for pair in corpus:
        links = align_monotone(pair)
        for i, j, a, b in _consistent_spans(len(pair.source), links, max_len):
            counts[(pair.source[i:j], pair.target[a:b])] += 1
    return counts


@dataclass(frozen=True)
class PhraseEntry:
    target: Phrase
    phi: float  # p(source | target)
    phi_rev: float  # p(target | source)
    count: int


class PhraseTable:
    """Source phrase -> target candidates, with both conditional directions."""

    def __init__(self, entries: dict[Phrase, list[PhraseEntry]], max_len: int):
        self.max_len = max_len
        # candidates per source phrase, best phi_rev first
        self._by_source = {
            f: sorted(es, key=lambda e: (-e.phi_rev, e.target)) for f, es in entries.items()
        }

    def __contains__(self, source: Phrase) -> bool:
        return source in self._by_source

    def __len__(self):
        return sum(len(v) for v in self._by_source.values())

    def lookup(self, source: Phrase) -> list[PhraseEntry]:
        return self._by_source.get(tuple(source), [])

    def sources(self):
        return self._by_source.keys()

    def items(self):
        for f, es in self._by_source.items():
            for e in es:
                yield f, e

    def by_target(self) -> dict[Phrase, list[tuple[Phrase, PhraseEntry]]]:
        out = defaultdict(list)
        for f, e in self.items():
            out[e.target].append((f, e))
        return dict(out)

    def save(self, path: str | Path) -> None:
        """Write ``f ||| e ||| phi phi_rev count`` lines."""
        lines = []
        for f in sorted(self._by_source):
            for e in self._by_source[f]:
                lines.append(f"{' '.join(f)} ||| {' '.join(e.target)} ||| {e.phi!r} {e.phi_rev!r} {e.count}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PhraseTable":
        entries = defaultdict(list)
        max_len = 0
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split(" ||| ")
            try:
                if len(parts) != 3:
                    raise ValueError("expected 3 fields separated by ' ||| '")
                f, e = tuple(parts[0].split()), tuple(parts[1].split())
                phi, phi_rev, count = parts[2].split()
                entries[f].append(PhraseEntry(e, float(phi), float(phi_rev), int(count)))
            except ValueError as exc:
                raise PhraseTableError(f"{path}:{lineno}: {exc}") from None
            max_len = max(max_len, len(f), len(e))
        if not entries:
            raise PhraseTableError(f"{path}: empty phrase table")
        return cls(entries, max_len)


def estimate_phrase_table(counts: Counter, min_count: int = 1) -> PhraseTable:
    """phi(f|e) = c(f,e)/c(e) and phi_rev(e|f) = c(f,e)/c(f) from extracted counts."""
    counts = Counter({k: c for k, c in counts.items() if c >= min_count})
    if not counts:
        raise PhraseTableError("no phrase pairs to estimate from")
    c_e: Counter = Counter()
    c_f: Counter = Counter()
    for (f, e), c in counts.items():
        c_e[e] += c
        c_f[f] += c
    entries = defaultdict(list)
    max_len = 0
    for (f, e), c in counts.items():
        entries[f].append(PhraseEntry(e, c / c_e[e], c / c_f[f], c))
        max_len = max(max_len, len(f), len(e))
    return PhraseTable(entries, max_len)


def train_phrase_table(corpus: ParallelCorpus, max_len: int = 4, min_count: int = 1) -> PhraseTable:
    return estimate_phrase_table(extract_phrases(corpus, max_len), min_count)


def check_table(table: PhraseTable, tol: float = 1e-9) -> None:
    """Raise if phi does not normalize per target phrase or a pair is not a strip pair."""
    for e, rows in table.by_target().items():
        mass = math.fsum(entry.phi for _, entry in rows)
        if abs(mass - 1.0) > tol:
            raise PhraseTableError(f"sum_f phi(f|{' '.join(e)}) = {mass!r}")
        for f, _ in rows:
            if len(f) != len(e) or any(strip_text(t) != s for s, t in zip(f, e)):
                raise PhraseTableError(f"{f} is not the stripped form of {e}")
