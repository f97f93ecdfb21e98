"""Extract a desk-scale Vietnamese corpus from the underthesea wheel.

The underthesea package (Apache-2.0) ships the tagged VLSP-2013 test set as a
model diagnostics file. We pull the surface tokens out of it, split the long
legal/news sentences into clauses at . , ; : ! ? and keep unique clauses of
at least four tokens. Result: one sentence per line, UTF-8.

    python scripts/fetch_corpus.py --wheel underthesea-9.5.0-py3-none-any.whl
    python scripts/fetch_corpus.py            # downloads the wheel with pip
"""
import argparse
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBER = "underthesea/pipeline/pos_tag/models/pos_crf_vlsp2013_20230303/test_output.txt"
CLAUSE_END = {".", ",", ";", ":", "!", "?"}


def read_sentences(wheel):
    with zipfile.ZipFile(wheel) as zf:
        text = zf.read(MEMBER).decode("utf-8")
    for block in text.strip().split("\n\n"):
        tokens = [line.split("\t")[0] for line in block.splitlines() if line.strip()]
        if tokens:
            yield tokens


def clauses(tokens, min_tokens):
    cur = []
    for tok in tokens:
        cur.append(tok)
        if tok in CLAUSE_END:
            if len(cur) >= min_tokens:
                yield " ".join(cur)
            cur = []
    if len(cur) >= min_tokens:
        yield " ".join(cur)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheel", type=Path)
    ap.add_argument("--out", type=Path, default=Path(__file__).parents[1] / "data" / "vlsp2013_clauses.txt")
    ap.add_argument("--min-tokens", type=int, default=4)
    args = ap.parse_args(argv)

    wheel = args.wheel
    if wheel is None:
        tmp = Path(tempfile.mkdtemp())
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "underthesea==9.5.0", "--no-deps", "-d", str(tmp)],
            check=True,
        )
        wheel = next(tmp.glob("underthesea-*.whl"))

    seen = set()
    out = []
    for tokens in read_sentences(wheel):
        for clause in clauses(tokens, args.min_tokens):
            if clause not in seen:
                seen.add(clause)
                out.append(clause)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(out) + "\n", encoding="utf-8")
    print(f"wrote {len(out)} sentences to {args.out}")


if __name__ == "__main__":
    main()
