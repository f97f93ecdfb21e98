"""Vietnamese diacritic inventory, stripping and candidate lookup.

Every marked letter decomposes into a base letter (a e i o u y d), a
letter-modifying mark ("shape": breve, circumflex, horn, stroke) and a tone
mark. The inventory is generated from Unicode combining marks rather than
typed by hand so that the (base, shape, tone) decomposition is the single
source of truth.
"""
from __future__ import annotations

import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

BASES = ("a", "e", "i", "o", "u", "y", "d")
TONES = ("none", "acute", "grave", "hook", "tilde", "dot")

_TONE_MARK = {
    "none": "",
    "acute": "\u0301",
    "grave": "\u0300",
    "hook": "\u0309",
    "tilde": "\u0303",
    "dot": "\u0323",
}
_SHAPE_MARK = {"plain": "", "breve": "\u0306", "circumflex": "\u0302", "horn": "\u031b"}

# base -> type-1 shapes it takes
VOWEL_SHAPES = {
    "a": ("plain", "breve", "circumflex"),
    "e": ("plain", "circumflex"),
    "i": ("plain",),
    "o": ("plain", "circumflex", "horn"),
    "u": ("plain", "horn"),
    "y": ("plain",),
}


class DiacriticMapError(ValueError):
    pass


@dataclass(frozen=True)
class Variant:
    char: str
    base: str
    shape: str  # plain | breve | circumflex | horn | stroke
    tone: str  # one of TONES

    @property
    def type1(self) -> bool:
        return self.shape != "plain"


@dataclass(frozen=True)
class DiacriticMap:
    """Lower-case inventory; case is handled by the stripping functions."""

    entries: Mapping[str, tuple[str, ...]]
    reverse: Mapping[str, str]
    meta: Mapping[str, Variant]
    _table: dict = field(repr=False, compare=False, default_factory=dict)

    @classmethod
    def from_variants(cls, variants: Iterable[Variant]) -> "DiacriticMap":
        entries: dict[str, list[str]] = defaultdict(list)
        reverse: dict[str, str] = {}
        meta: dict[str, Variant] = {}
        for v in variants:
            if v.base not in BASES:
                raise DiacriticMapError(f"unknown base {v.base!r}")
            if v.char in reverse and reverse[v.char] != v.base:
                raise DiacriticMapError(f"{v.char!r} maps to both {reverse[v.char]!r} and {v.base!r}")
            if v.char in meta:
                continue
            entries[v.base].append(v.char)
            reverse[v.char] = v.base
            meta[v.char] = v
        missing = set(BASES) - set(entries)
        if missing:
            raise DiacriticMapError(f"no variants for bases {sorted(missing)}")
        table = {}
        for ch, base in reverse.items():
            if ch != base:
                table[ord(ch)] = base
                up, base_up = ch.upper(), base.upper()
                if len(up) == 1 and up != ch:
                    table[ord(up)] = base_up
        return cls({b: tuple(vs) for b, vs in entries.items()}, reverse, meta, table)

    def compose(self, base: str, shape: str, tone: str) -> str:
        """Rebuild the variant character from its decomposition."""
        for ch in self.entries.get(base, ()):
            v = self.meta[ch]
            if v.shape == shape and v.tone == tone:
                return ch
        raise KeyError((base, shape, tone))

    def strip_char(self, c: str) -> str:
        return c.translate(self._table)

    def strip_text(self, s: str) -> str:
        return s.translate(self._table)


def _standard_variants():
    for base, shapes in VOWEL_SHAPES.items():
        for shape in shapes:
            for tone in TONES:
                ch = unicodedata.normalize("NFC", base + _SHAPE_MARK[shape] + _TONE_MARK[tone])
                assert len(ch) == 1, (base, shape, tone)
                yield Variant(ch, base, shape, tone)
    yield Variant("d", "d", "plain", "none")
    yield Variant("đ", "d", "stroke", "none")


STANDARD_MAP = DiacriticMap.from_variants(_standard_variants())


def load_map(path: str | Path) -> DiacriticMap:
    """Read an override file: ``base<TAB>variant<TAB>shape<TAB>tone`` per line."""
    variants = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DiacriticMapError(f"{path}:{lineno}: expected 4 tab-separated fields")
        base, char, shape, tone = parts
        if tone not in TONES:
            raise DiacriticMapError(f"{path}:{lineno}: unknown tone {tone!r}")
        variants.append(Variant(char, base, shape, tone))
    return DiacriticMap.from_variants(variants)


def dump_map(dmap: DiacriticMap, path: str | Path) -> None:
    lines = [f"{v.base}\t{v.char}\t{v.shape}\t{v.tone}" for v in dmap.meta.values()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def strip_char(c: str, dmap: DiacriticMap = STANDARD_MAP) -> str:
    return dmap.strip_char(c)


def strip_text(s: str, dmap: DiacriticMap = STANDARD_MAP) -> str:
    """Remove every diacritic; length and whitespace are preserved."""
    return dmap.strip_text(s)


def has_diacritics(token: str, dmap: DiacriticMap = STANDARD_MAP) -> bool:
    return dmap.strip_text(token) != token


def build_candidate_index(lexicon: Iterable[str], dmap: DiacriticMap = STANDARD_MAP) -> dict[str, frozenset[str]]:
    index: dict[str, set[str]] = defaultdict(set)
    for tok in lexicon:
        index[dmap.strip_text(tok)].add(tok)
    return {k: frozenset(v) for k, v in index.items()}


def candidates(token: str, lexicon, dmap: DiacriticMap = STANDARD_MAP) -> set[str]:
    """Lexicon entries whose stripped form is ``token``; ``{token}`` if none.

    ``lexicon`` is either a set of diacritized tokens or a prebuilt index from
    :func:`build_candidate_index` (preferred for repeated queries).
    """
    if isinstance(lexicon, Mapping):
        found = set(lexicon.get(token, ()))
    else:
        found = {t for t in lexicon if dmap.strip_text(t) == token}
    return found or {token}


@dataclass
class AmbiguityReport:
    pct_tokens_with_diacritics: float
    pct_types_with_diacritics: float
    pct_stripped_forms_ambiguous: float
    pct_tokens_ambiguous: float
    candidate_counts: dict[str, int]

    @property
    def ambiguous_forms(self) -> list[str]:
        return sorted(f for f, n in self.candidate_counts.items() if n >= 2)


def ambiguity_stats(corpus: Iterable[str], dmap: DiacriticMap = STANDARD_MAP) -> AmbiguityReport:
    """Diacritic and ambiguity rates over a diacritized corpus.

    Words are whitespace tokens containing at least one letter, case-folded.
    Both type-level and token-level rates are reported.
    """
    counts: Counter[str] = Counter()
    for sent in corpus:
        for tok in sent.split():
            if any(ch.isalpha() for ch in tok):
                counts[tok.lower()] += 1
    if not counts:
        raise ValueError("empty corpus: no words to compute statistics over")

    realizations: dict[str, set[str]] = defaultdict(set)
    for w in counts:
        realizations[dmap.strip_text(w)].add(w)
    cand_counts = {f: len(ws) for f, ws in realizations.items()}

    n_tokens = sum(counts.values())
    marked_types = [w for w in counts if has_diacritics(w, dmap)]
    marked_tokens = sum(counts[w] for w in marked_types)
    ambiguous_tokens = sum(c for w, c in counts.items() if cand_counts[dmap.strip_text(w)] >= 2)
    n_ambiguous_forms = sum(1 for n in cand_counts.values() if n >= 2)
    return AmbiguityReport(
        pct_tokens_with_diacritics=100.0 * marked_tokens / n_tokens,
        pct_types_with_diacritics=100.0 * len(marked_types) / len(counts),
        pct_stripped_forms_ambiguous=100.0 * n_ambiguous_forms / len(cand_counts),
        pct_tokens_ambiguous=100.0 * ambiguous_tokens / n_tokens,
        candidate_counts=cand_counts,
    )
