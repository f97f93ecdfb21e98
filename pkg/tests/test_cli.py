import io
import json
import subprocess
import sys

import pytest

from vndiac.cli import main, read_config

SENTS = [
    "Cô ấy rất đảm đang .",
    "Tôi đi học ở trường .",
    "Hắn ta dâm đãng quá .",
    "Cô giáo đi chợ mua rau .",
    "Trời hôm nay rất đẹp .",
] * 4


def feed_stdin(monkeypatch, text):
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO(text.encode("utf-8")), encoding="utf-8"))


@pytest.fixture()
def pipeline(tmp_path, monkeypatch, capsys):
    raw = tmp_path / "raw.txt"
    raw.write_text("\ufeff" + "\n".join(SENTS) + "\n", encoding="utf-8")
    models = tmp_path / "models"
    monkeypatch.setenv("VNDIAC_MODELS", str(models))
    assert main(["build-corpus", "-i", str(raw), "-o", str(tmp_path / "corpus")]) == 0
    assert main(["split", "--corpus", str(tmp_path / "corpus"), "-o", str(tmp_path / "split"), "--seed", "1"]) == 0
    assert main(["train-lm", "--corpus", str(tmp_path / "corpus")]) == 0
    assert main(["train-phrase", "--corpus", str(tmp_path / "corpus")]) == 0
    capsys.readouterr()
    return tmp_path


def test_strip_stdin(monkeypatch, capsys):
    feed_stdin(monkeypatch, "\ufeffCô ấy rất đảm đang\nĐà Nẵng\n")
    assert main(["strip"]) == 0
    assert capsys.readouterr().out == "Co ay rat dam dang\nDa Nang\n"


def test_restore_line_discipline(pipeline, monkeypatch, capsys):
    src = "Co ay rat dam dang .\n\nToi di hoc o truong .\nxyz\n"
    feed_stdin(monkeypatch, src)
    assert main(["restore", "--engine", "phrase"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4
    assert out[0] == "Cô ấy rất đảm đang ." and out[1] == "" and out[3] == "xyz"


def test_restore_jobs_preserve_order(pipeline, capsys):
    inp = pipeline / "in.txt"
    inp.write_text("".join(l + "\n" for l in (pipeline / "corpus" / "source.txt").read_text().splitlines()))
    assert main(["restore", "-i", str(inp)]) == 0
    serial = capsys.readouterr().out
    assert main(["restore", "-i", str(inp), "--jobs", "2"]) == 0
    assert capsys.readouterr().out == serial
    assert serial.splitlines() == (pipeline / "corpus" / "target.txt").read_text().splitlines()


def test_evaluate_identity(pipeline, capsys):
    ref = pipeline / "corpus" / "target.txt"
    assert main(["evaluate", "--hyp", str(ref), "--ref", str(ref)]) == 0
    assert "accuracy 100.00" in capsys.readouterr().out
    assert main(["evaluate", "--hyp", str(ref), "--ref", str(ref), "--format", "json", "--exclude-punct"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["accuracy"] == 100.0 and d["exclude_punct"] is True


def test_strip_then_restore_round_trip(pipeline, monkeypatch, capsys):
    feed_stdin(monkeypatch, "\n".join(SENTS[:5]) + "\n")
    assert main(["strip"]) == 0
    stripped = capsys.readouterr().out
    feed_stdin(monkeypatch, stripped)
    assert main(["restore"]) == 0
    hyp = pipeline / "hyp.txt"
    hyp.write_text(capsys.readouterr().out, encoding="utf-8")
    ref = pipeline / "ref.txt"
    ref.write_text("\n".join(SENTS[:5]) + "\n", encoding="utf-8")
    assert main(["evaluate", "--hyp", str(hyp), "--ref", str(ref), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] > 90


def test_split_records_seed(pipeline):
    rows = [json.loads(l) for l in (pipeline / "split" / "stats.jsonl").read_text().splitlines()]
    assert [r["part"] for r in rows] == ["train", "dev", "test"]
    assert all(r["seed"] == 1 for r in rows)
    assert [r["sentences"] for r in rows] == [16, 2, 2]


def test_config_file_and_precedence(pipeline, capsys):
    cfg = pipeline / "run.cfg"
    cfg.write_text("# decoder\norder = 2\nkind = addk\nk = 0.5\n", encoding="utf-8")
    out = pipeline / "lm2.arpa"
    assert main(["--config", str(cfg), "train-lm", "--corpus", str(pipeline / "corpus"), "-o", str(out),
                 "--k", "0.1"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["order"] == 2 and d["smoothing"]["kind"] == "addk" and d["smoothing"]["k"] == 0.1
    assert read_config(cfg) == {"order": "2", "kind": "addk", "k": "0.5"}


def test_train_neural_and_bench(pipeline, capsys):
    split = pipeline / "split"
    assert main(["train-neural", "--train", str(split / "train"), "--dev", str(split / "dev"), "--hidden", "8",
                 "--embed", "4", "--max-epochs", "2", "--feed-context", "false"]) == 0
    log = (pipeline / "models" / "seq2seq.log.jsonl").read_text().splitlines()
    assert json.loads(log[0])["config"]["feed_context"] is False
    assert json.loads(log[0])["config"]["seed"] == 0
    capsys.readouterr()
    assert main(["bench", "--test", str(split / "test"), "--format", "json", "--warmup", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert [s["name"] for s in rep["systems"]] == ["phrase", "neural"]
    assert all(s["sentences_per_second"] > 0 for s in rep["systems"])
    assert main(["bench", "--test", str(split / "test")]) == 0
    assert capsys.readouterr().out.splitlines()[0].startswith("system")


@pytest.mark.parametrize("argv", [["nope"], ["restore", "--bogus"], [], ["restore", "--engine", "rnn"],
                                  ["train-neural", "--train", "a", "--dev", "b", "--feed-context", "maybe"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_models_dir_is_usage_error(monkeypatch, capsys):
    monkeypatch.delenv("VNDIAC_MODELS", raising=False)
    feed_stdin(monkeypatch, "a\n")
    assert main(["restore"]) == 1


def test_invalid_setting_exit_1(pipeline, monkeypatch):
    feed_stdin(monkeypatch, "a\n")
    assert main(["restore", "--beam-width", "0"]) == 1


def test_malformed_models_exit_2(pipeline, monkeypatch, capsys):
    (pipeline / "models" / "phrase_table.txt").write_text("a ||| b\n", encoding="utf-8")
    feed_stdin(monkeypatch, "a\n")
    assert main(["restore"]) == 2
    assert "phrase_table.txt:1" in capsys.readouterr().err
    (pipeline / "models" / "seq2seq.bin").write_bytes(b"garbage")
    feed_stdin(monkeypatch, "a\n")
    assert main(["restore", "--engine", "neural"]) == 2
    assert "header" in capsys.readouterr().err


def test_missing_input_exit_2(tmp_path, capsys):
    assert main(["build-corpus", "-i", str(tmp_path / "none.txt"), "-o", str(tmp_path / "c")]) == 2


def test_outputs_idempotent(pipeline, capsys):
    lm = (pipeline / "models" / "lm.arpa").read_bytes()
    pt = (pipeline / "models" / "phrase_table.txt").read_bytes()
    assert main(["train-lm", "--corpus", str(pipeline / "corpus")]) == 0
    assert main(["train-phrase", "--corpus", str(pipeline / "corpus")]) == 0
    assert (pipeline / "models" / "lm.arpa").read_bytes() == lm
    assert (pipeline / "models" / "phrase_table.txt").read_bytes() == pt


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "vndiac", "strip"], input="Đảm đang\n".encode(), capture_output=True)
    assert p.returncode == 0 and p.stdout.decode() == "Dam dang\n"
    p = subprocess.run([sys.executable, "-m", "vndiac", "--nope"], capture_output=True)
    assert p.returncode == 1 and b"usage" in p.stderr
