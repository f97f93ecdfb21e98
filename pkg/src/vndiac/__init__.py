"""Vietnamese diacritic restoration framed as translation from stripped to marked text.

Two engines share one corpus pipeline: a phrase-based noisy-channel decoder
(:mod:`vndiac.decoder`) and a GRU encoder-decoder (:mod:`vndiac.seq2seq`).
"""
__version__ = "0.1.0"

from .diacritics import strip_text, has_diacritics, candidates
from .corpus import normalize, tokenize, build_parallel, split_corpus, ParallelCorpus, SentencePair, SplitSpec
from .lm import NGramModel, Smoothing, train_lm
from .phrase_model import PhraseTable, train_phrase_table
from .decoder import DecoderConfig, decode
from .evaluation import word_accuracy, bleu

__all__ = [
    "strip_text", "has_diacritics", "candidates",
    "normalize", "tokenize", "build_parallel", "split_corpus", "ParallelCorpus", "SentencePair", "SplitSpec",
    "NGramModel", "Smoothing", "train_lm", "PhraseTable", "train_phrase_table",
    "DecoderConfig", "decode", "word_accuracy", "bleu",
]
