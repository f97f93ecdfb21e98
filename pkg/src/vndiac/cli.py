"""Command-line entry point: ``vndiac <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or model error.
Text interchange is one sentence per line, UTF-8 (a leading BOM is ignored).
Settings resolve as flags > ``--config`` file (``key = value`` lines) > defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .corpus import CorpusError, ParallelCorpus, SplitSpec, build_parallel, normalize, read_lines, split_corpus, tokenize
from .decoder import DecoderConfig, decode
from .diacritics import DiacriticMapError, strip_text
from .evaluation import EvalError, EvalReport, System, SystemRow, benchmark_throughput, bleu, word_accuracy
from .lm import LMError, NGramModel, Smoothing, train_lm
from .phrase_model import PhraseTable, PhraseTableError, train_phrase_table
from .seq2seq import ModelFormatError, Seq2SeqModel, TrainConfig, TrainingDiverged, restore_neural, train_seq2seq

log = logging.getLogger("vndiac")

MODELS_ENV = "VNDIAC_MODELS"
LM_FILE, PT_FILE, NEURAL_FILE = "lm.arpa", "phrase_table.txt", "seq2seq.bin"

DATA_ERRORS = (CorpusError, LMError, PhraseTableError, ModelFormatError, DiacriticMapError, EvalError,
               TrainingDiverged, OSError, UnicodeDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if like is None and value.lower() == "none":
        return None
    try:
        return int(value)
    except ValueError:
        return value


def _dataclass_from(cls, args, cfg: dict, prefix: str = ""):
    """Build a config dataclass from defaults, then config file, then explicit flags."""
    kwargs = {}
    for f in fields(cls):
        default = cls.__dataclass_fields__[f.name].default
        key = prefix + f.name
        val = getattr(args, key, None)
        if val is not None:
            kwargs[f.name] = val
        elif key in cfg:
            kwargs[f.name] = _coerce(cfg[key], default)
    return cls(**kwargs)


def _models_dir(args) -> Path:
    d = args.models or os.environ.get(MODELS_ENV)
    if not d:
        raise UsageError(f"no model directory: pass --models or set {MODELS_ENV}")
    return Path(d)


def _input_lines(path) -> list[str]:
    if path and path != "-":
        return read_lines(path)
    data = sys.stdin.buffer.read()
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    return data.decode("utf-8").splitlines()


# -- restoration engines ----------------------------------------------------

class PhraseEngine:
    def __init__(self, models: Path, config: DecoderConfig):
        self.table = PhraseTable.load(models / PT_FILE)
        self.lm = NGramModel.load_arpa(models / LM_FILE)
        self.config = config

    def __call__(self, tokens):
        return decode(tokens, self.table, self.lm, self.config)


class NeuralEngine:
    def __init__(self, models: Path, beam: int = 1):
        self.model = Seq2SeqModel.load(models / NEURAL_FILE)
        self.beam = beam

    def __call__(self, tokens):
        return restore_neural(self.model, tokens, self.beam)


_worker_engine = None


def _init_worker(factory):
    global _worker_engine
    _worker_engine = factory()


def _restore_line(line):
    return " ".join(_worker_engine(tokenize(normalize(line))))


class _Factory:
    def __init__(self, engine, models, dcfg, beam):
        self.engine, self.models, self.dcfg, self.beam = engine, models, dcfg, beam

    def __call__(self):
        if self.engine == "phrase":
            return PhraseEngine(self.models, self.dcfg)
        return NeuralEngine(self.models, self.beam)


def restore_lines(lines, factory, jobs=1):
    """Restore every line, keeping input order; ``jobs > 1`` uses worker processes."""
    if jobs <= 1 or len(lines) < 2:
        _init_worker(factory)
        return [_restore_line(l) for l in lines]
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(factory,)) as ex:
        return list(ex.map(_restore_line, lines, chunksize=max(1, len(lines) // (4 * jobs))))


# -- subcommands ------------------------------------------------------------

def cmd_strip(args, cfg):
    out = [strip_text(normalize(l)) for l in _input_lines(args.input)]
    sys.stdout.write("".join(l + "\n" for l in out))


def cmd_build_corpus(args, cfg):
    sentences = [normalize(l) for l in _input_lines(args.input)]
    max_tokens = args.max_tokens if args.max_tokens is not None else int(cfg.get("max_tokens", 100))
    corpus = build_parallel(sentences, max_tokens=max_tokens or None)
    corpus.save(args.out)
    if corpus.skipped:
        Path(args.out, "skipped.txt").write_text("".join(f"{i + 1}\n" for i in corpus.skipped), encoding="utf-8")
    print(json.dumps(corpus.stats(), ensure_ascii=False))


def cmd_split(args, cfg):
    spec = _dataclass_from(SplitSpec, args, cfg)
    corpus = ParallelCorpus.load(args.corpus)
    out = Path(args.out)
    rows = []
    for name, part in zip(("train", "dev", "test"), split_corpus(corpus, spec)):
        part.save(out / name, name)
        rows.append(part.stats(name))
    with open(out / "stats.jsonl", "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps({**r, "seed": spec.seed}, ensure_ascii=False) + "\n")
    for r in rows:
        print(json.dumps(r, ensure_ascii=False))


def cmd_train_lm(args, cfg):
    sm = _dataclass_from(Smoothing, args, cfg, prefix="")
    order = args.order or int(cfg.get("order", 3))
    corpus = ParallelCorpus.load(args.corpus)
    model = train_lm(corpus.targets, order, sm)
    out = Path(args.out) if args.out else _models_dir(args) / LM_FILE
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save_arpa(out)
    print(json.dumps({"order": order, "smoothing": asdict(sm), "ngrams": len(model.logprobs), "out": str(out)}))


def cmd_train_phrase(args, cfg):
    max_len = args.max_phrase_len or int(cfg.get("max_phrase_len", 4))
    min_count = args.min_count or int(cfg.get("min_count", 1))
    corpus = ParallelCorpus.load(args.corpus)
    table = train_phrase_table(corpus, max_len, min_count)
    out = Path(args.out) if args.out else _models_dir(args) / PT_FILE
    out.parent.mkdir(parents=True, exist_ok=True)
    table.save(out)
    print(json.dumps({"max_phrase_len": max_len, "min_count": min_count, "pairs": len(table), "out": str(out)}))


def cmd_train_neural(args, cfg):
    tcfg = _dataclass_from(TrainConfig, args, cfg)
    train = ParallelCorpus.load(args.train)
    dev = ParallelCorpus.load(args.dev)
    result = train_seq2seq(train, dev, tcfg, on_epoch=lambda e: log.info("epoch %s", e))
    out = Path(args.out) if args.out else _models_dir(args) / NEURAL_FILE
    out.parent.mkdir(parents=True, exist_ok=True)
    result.model.save(out)
    log_path = out.with_suffix(".log.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config": asdict(tcfg)}) + "\n")
        for e in result.log:
            fh.write(json.dumps(e) + "\n")
    print(json.dumps({"best_epoch": result.best_epoch, "seconds": round(result.seconds, 3), "out": str(out)}))


def _decoder_config(args, cfg):
    return _dataclass_from(DecoderConfig, args, cfg)


def cmd_restore(args, cfg):
    models = _models_dir(args)
    factory = _Factory(args.engine, models, _decoder_config(args, cfg), args.beam)
    lines = _input_lines(args.input)
    out = restore_lines(lines, factory, args.jobs)
    sys.stdout.write("".join(l + "\n" for l in out))


def cmd_evaluate(args, cfg):
    hyps = [l.split() for l in read_lines(args.hyp)]
    refs = [l.split() for l in read_lines(args.ref)]
    acc = word_accuracy(hyps, refs, exclude_punct=args.exclude_punct)
    score = bleu(hyps, refs)
    if args.format == "json":
        print(json.dumps({"accuracy": acc, "bleu": score, "sentences": len(refs),
                          "exclude_punct": args.exclude_punct}, sort_keys=True))
    else:
        print(f"accuracy {acc:.2f}\nbleu {score:.2f}\nsentences {len(refs)}")


def cmd_bench(args, cfg):
    models = _models_dir(args)
    test = ParallelCorpus.load(args.test)
    if args.limit:
        test = ParallelCorpus(test.pairs[: args.limit])
    dcfg = _decoder_config(args, cfg)
    engines = args.engines.split(",")
    train_times = {}
    for name in engines:
        fname = {"phrase": "train_seconds_phrase", "neural": "train_seconds_neural"}[name]
        if getattr(args, fname) is not None:
            train_times[name] = getattr(args, fname)
    rows = []
    for name in engines:
        engine = _Factory(name, models, dcfg, args.beam)()
        hyps = [list(engine(s)) for s in test.sources]
        tp = benchmark_throughput(engine, test.sources, warmup=args.warmup)
        rows.append(SystemRow(name, word_accuracy(hyps, test.targets), bleu(hyps, test.targets),
                              tp.sentences_per_second, train_times.get(name), tp.p50_ms, tp.p95_ms))
    report = EvalReport(rows, str(args.test), {"decoder": asdict(dcfg), "beam": args.beam, "warmup": args.warmup})
    sys.stdout.write(report.render(args.format))


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vndiac", description="Vietnamese diacritic restoration as machine translation.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("strip", help="remove diacritics from lines")
    s.add_argument("--input", "-i")
    s.set_defaults(func=cmd_strip)

    s = sub.add_parser("build-corpus", help="diacritized sentences -> parallel corpus directory")
    s.add_argument("--input", "-i")
    s.add_argument("--out", "-o", required=True)
    s.add_argument("--max-tokens", type=int, help="drop longer sentences (0 keeps all; default 100)")
    s.set_defaults(func=cmd_build_corpus)

    s = sub.add_parser("split", help="shuffle and split a corpus into train/dev/test")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", "-o", required=True)
    s.add_argument("--train-fraction", dest="train_fraction", type=float)
    s.add_argument("--dev-fraction", dest="dev_fraction", type=float)
    s.add_argument("--test-fraction", dest="test_fraction", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train-lm", help="train the n-gram language model")
    s.add_argument("--corpus", required=True)
    s.add_argument("--models")
    s.add_argument("--out", "-o")
    s.add_argument("--order", type=int)
    s.add_argument("--kind", choices=("kn", "addk"))
    s.add_argument("--discount", type=float)
    s.add_argument("--k", type=float)
    s.add_argument("--min-count", dest="min_count", type=int)
    s.set_defaults(func=cmd_train_lm)

    s = sub.add_parser("train-phrase", help="extract and estimate the phrase table")
    s.add_argument("--corpus", required=True)
    s.add_argument("--models")
    s.add_argument("--out", "-o")
    s.add_argument("--max-phrase-len", dest="max_phrase_len", type=int)
    s.add_argument("--min-count", dest="min_count", type=int)
    s.set_defaults(func=cmd_train_phrase)

    s = sub.add_parser("train-neural", help="train the seq2seq restorer")
    s.add_argument("--train", required=True)
    s.add_argument("--dev", required=True)
    s.add_argument("--models")
    s.add_argument("--out", "-o")
    for f in fields(TrainConfig):
        default = TrainConfig.__dataclass_fields__[f.name].default
        kind = {bool: _bool, int: int, float: float}.get(type(default), str)
        s.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind)
    s.set_defaults(func=cmd_train_neural)

    for name, func, help_ in (("restore", cmd_restore, "restore diacritics line by line"),
                              ("bench", cmd_bench, "accuracy/BLEU/throughput report for both engines")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--models")
        s.add_argument("--beam", type=int, default=1, help="neural beam size")
        for f in fields(DecoderConfig):
            default = DecoderConfig.__dataclass_fields__[f.name].default
            kind = {int: int, float: float}.get(type(default), int)
            s.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind)
        s.set_defaults(func=func)
        if name == "restore":
            s.add_argument("--engine", choices=("phrase", "neural"), default="phrase")
            s.add_argument("--input", "-i")
            s.add_argument("--jobs", "-j", type=int, default=1)
        else:
            s.add_argument("--test", required=True, help="corpus directory")
            s.add_argument("--engines", default="phrase,neural")
            s.add_argument("--limit", type=int)
            s.add_argument("--warmup", type=int, default=5)
            s.add_argument("--train-seconds-phrase", dest="train_seconds_phrase", type=float)
            s.add_argument("--train-seconds-neural", dest="train_seconds_neural", type=float)
            s.add_argument("--format", choices=("text", "json"), default="text")

    s = sub.add_parser("evaluate", help="word accuracy and BLEU of hypothesis vs reference lines")
    s.add_argument("--hyp", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--exclude-punct", action="store_true")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_evaluate)
    return p


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {v!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        cfg = read_config(args.config) if args.config else {}
        args.func(args, cfg)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except DATA_ERRORS as e:
        print(f"vndiac: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as e:
        # invalid settings rejected by a config dataclass
        print(f"vndiac: error: {e}", file=sys.stderr)
        return 1
    return 0


run_cli = main


if __name__ == "__main__":
    sys.exit(main())
