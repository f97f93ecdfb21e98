"""Desk-scale comparison of the phrase-based and neural restorers.

Builds the parallel corpus from a file of diacritized sentences, splits it
80/10/10, trains both engines on the training part and writes an
accuracy/BLEU/throughput report for the test part.

    python scripts/run_experiment.py --corpus data/vlsp2013_clauses.txt --out runs/desk
    python scripts/run_experiment.py --skip-neural          # phrase-based only, ~30 s
"""
import argparse
import json
import logging
import time
from dataclasses import asdict
from pathlib import Path

from vndiac.corpus import SplitSpec, build_parallel, read_lines, split_corpus
from vndiac.decoder import DecoderConfig, decode
from vndiac.evaluation import System, compare_report
from vndiac.lm import train_lm
from vndiac.phrase_model import train_phrase_table
from vndiac.seq2seq import TrainConfig, restore_neural, train_seq2seq

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", default=ROOT / "data" / "vlsp2013_clauses.txt", type=Path)
    ap.add_argument("--out", default=ROOT / "runs" / "desk", type=Path)
    ap.add_argument("--seed", type=int, default=13, help="split seed")
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--max-phrase-len", type=int, default=4)
    ap.add_argument("--hidden", type=int, default=256)
    ap.add_argument("--embed", type=int, default=64)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--beam", type=int, default=1, help="neural beam size")
    ap.add_argument("--skip-neural", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    log = logging.getLogger("experiment")

    corpus = build_parallel(read_lines(args.corpus))
    train, dev, test = split_corpus(corpus, SplitSpec(seed=args.seed))
    args.out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        part.save(args.out / "corpus" / name, name)
    log.info("split %d/%d/%d", len(train), len(dev), len(test))

    t0 = time.perf_counter()
    table = train_phrase_table(train, args.max_phrase_len)
    lm = train_lm(train.targets, args.order)
    phrase_secs = time.perf_counter() - t0
    table.save(args.out / "phrase_table.txt")
    lm.save_arpa(args.out / "lm.arpa")
    dcfg = DecoderConfig(max_phrase_len=args.max_phrase_len)
    systems = [System("phrase-based", lambda s: decode(s, table, lm, dcfg), phrase_secs)]
    log.info("phrase-based models trained in %.1fs", phrase_secs)

    tcfg = TrainConfig(hidden=args.hidden, embed=args.embed, max_epochs=args.epochs, dtype="float32")
    if not args.skip_neural:
        res = train_seq2seq(train, dev, tcfg, on_epoch=lambda e: log.info("neural %s", e))
        res.model.save(args.out / "seq2seq.bin")
        with open(args.out / "seq2seq.log.jsonl", "w", encoding="utf-8") as fh:
            for e in res.log:
                fh.write(json.dumps(e) + "\n")
        systems.append(System("neural", lambda s: restore_neural(res.model, s, args.beam), res.seconds))

    config = {"split": asdict(SplitSpec(seed=args.seed)), "lm_order": args.order, "decoder": asdict(dcfg),
              "neural": None if args.skip_neural else asdict(tcfg), "neural_beam": args.beam}
    report = compare_report(systems, test.sources, test.targets, str(args.corpus), config)
    (args.out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (args.out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    print(report.to_text(), end="")


if __name__ == "__main__":
    main()
