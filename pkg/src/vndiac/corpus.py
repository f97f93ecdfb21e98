"""Text cleaning, tokenization, parallel-corpus construction and splitting."""
from __future__ import annotations

import json
import logging
import math
import random
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .diacritics import strip_text

log = logging.getLogger(__name__)

# Unicode general categories removed by normalize(); whitespace is handled first.
DEFAULT_DROP_CATEGORIES = ("Cc", "Cf", "Co", "Cs", "Cn")
_WS = re.compile(r"\s+")


class CorpusError(ValueError):
    pass


def normalize(text: str | bytes, drop_categories: Sequence[str] = DEFAULT_DROP_CATEGORIES) -> str:
    """NFC-compose, drop non-standard characters, collapse whitespace."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorpusError(f"invalid UTF-8 at byte offset {e.start}") from e
    text = unicodedata.normalize("NFC", text)
    text = _WS.sub(" ", text)
    drop = set(drop_categories)
    if drop:
        text = "".join(ch for ch in text if ch == " " or unicodedata.category(ch) not in drop)
        text = _WS.sub(" ", text)
    return text.strip()


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def is_punct_token(tok: str) -> bool:
    return bool(tok) and all(_is_punct(ch) for ch in tok)


def tokenize(sentence: str) -> list[str]:
    """Whitespace split, with leading/trailing punctuation detached.

    Each detached punctuation character becomes its own token; punctuation
    inside a word ("11/1945", "a-ba") is left alone.
    """
    out = []
    for chunk in sentence.split():
        i, j = 0, len(chunk)
        while i < j and _is_punct(chunk[i]):
            i += 1
        while j > i and _is_punct(chunk[j - 1]):
            j -= 1
        out.extend(chunk[:i])
        if i < j:
            out.append(chunk[i:j])
        out.extend(chunk[j:])
    return out


@dataclass(frozen=True)
class SentencePair:
    source: tuple[str, ...]
    target: tuple[str, ...]

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise CorpusError(f"length mismatch: {len(self.source)} source vs {len(self.target)} target tokens")
        for s, t in zip(self.source, self.target):
            if strip_text(t) != s:
                raise CorpusError(f"source token {s!r} is not the stripped form of {t!r}")

    @classmethod
    def from_target(cls, target: Iterable[str]) -> "SentencePair":
        target = tuple(target)
        return cls(tuple(strip_text(t) for t in target), target)


@dataclass
class ParallelCorpus:
    pairs: list[SentencePair] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)  # input line indices dropped by the length cap

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def sources(self) -> list[tuple[str, ...]]:
        return [p.source for p in self.pairs]

    @property
    def targets(self) -> list[tuple[str, ...]]:
        return [p.target for p in self.pairs]

    def stats(self, part: str = "all") -> dict:
        return {
            "part": part,
            "sentences": len(self.pairs),
            "words": sum(len(p.target) for p in self.pairs),
            "source_types": len({t for p in self.pairs for t in p.source}),
            "target_types": len({t for p in self.pairs for t in p.target}),
        }

    def save(self, directory: str | Path, part: str = "all") -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "source.txt").write_text("".join(" ".join(p.source) + "\n" for p in self.pairs), encoding="utf-8")
        (d / "target.txt").write_text("".join(" ".join(p.target) + "\n" for p in self.pairs), encoding="utf-8")
        with open(d / "stats.jsonl", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.stats(part), ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "ParallelCorpus":
        d = Path(directory)
        src = (d / "source.txt").read_text(encoding="utf-8").splitlines()
        tgt = (d / "target.txt").read_text(encoding="utf-8").splitlines()
        if len(src) != len(tgt):
            raise CorpusError(f"{d}: source.txt has {len(src)} lines, target.txt has {len(tgt)}")
        pairs = []
        for i, (s, t) in enumerate(zip(src, tgt)):
            try:
                pairs.append(SentencePair(tuple(s.split()), tuple(t.split())))
            except CorpusError as e:
                raise CorpusError(f"{d}: line {i + 1}: {e}") from None
        return cls(pairs)


def build_parallel(sentences: Iterable[str], max_tokens: int | None = 100) -> ParallelCorpus:
    """Tokenize diacritized sentences and pair each with its stripped copy.

    Sentences longer than ``max_tokens`` are left out and their indices kept
    in ``corpus.skipped``; ``None`` or 0 disables the cap. Empty lines are
    skipped too.
    """
    corpus = ParallelCorpus()
    for i, sent in enumerate(sentences):
        toks = tokenize(sent)
        if not toks or (max_tokens and len(toks) > max_tokens):
            corpus.skipped.append(i)
            continue
        corpus.pairs.append(SentencePair.from_target(toks))
    if corpus.skipped:
        log.info("build_parallel: skipped %d sentences (empty or over %s tokens)", len(corpus.skipped), max_tokens)
    return corpus


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    dev_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 13

    def __post_init__(self):
        fr = (self.train_fraction, self.dev_fraction, self.test_fraction)
        if any(not f > 0 for f in fr):
            raise CorpusError(f"split fractions must be positive, got {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise CorpusError(f"split fractions must sum to 1, got {sum(fr)!r}")

    def sizes(self, n: int) -> tuple[int, int, int]:
        # round-half-up for train and dev, remainder to test
        n_train = math.floor(n * self.train_fraction + 0.5)
        n_dev = min(math.floor(n * self.dev_fraction + 0.5), n - n_train)
        return n_train, n_dev, n - n_train - n_dev


def split_corpus(corpus: ParallelCorpus, spec: SplitSpec = SplitSpec()):
    """Shuffle with ``spec.seed`` and cut into (train, dev, test)."""
    if not len(corpus):
        raise CorpusError("cannot split an empty corpus")
    order = list(range(len(corpus)))
    random.Random(spec.seed).shuffle(order)
    n_train, n_dev, _ = spec.sizes(len(order))
    cuts = (order[:n_train], order[n_train : n_train + n_dev], order[n_train + n_dev :])
    return tuple(ParallelCorpus([corpus.pairs[i] for i in idx]) for idx in cuts)


def read_lines(path: str | Path) -> list[str]:
    """UTF-8 lines with a leading BOM removed."""
    text = Path(path).read_bytes()
    if text.startswith(b"\xef\xbb\xbf"):
        text = text[3:]
    try:
        return text.decode("utf-8").splitlines()
    except UnicodeDecodeError as e:
        raise CorpusError(f"{path}: invalid UTF-8 at byte offset {e.start}") from e
