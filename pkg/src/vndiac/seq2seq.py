"""Attention-free GRU encoder-decoder written directly in numpy.

The encoder reads the stripped sentence and its final hidden state ``s`` is
the fixed-length representation. The decoder starts from ``s`` and predicts
each target token from its own hidden state through a vocabulary-sized
projection and a softmax. When ``feed_context`` is on (the default), ``s`` is
also concatenated to every decoder input, so each decoder state is a function
of the previous state, the previous token and ``s``.

Gradients are derived by hand (backprop through time) so that they can be
checked against finite differences; see :func:`gradient_check`.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import struct
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = range(4)


class TrainingDiverged(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


class Vocab:
    def __init__(self, tokens: Sequence[str], min_count: int = 1):
        self.itos = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        self.min_count = min_count

    @classmethod
    def build(cls, sentences, min_count: int = 1) -> "Vocab":
        freq = Counter(t for s in sentences for t in s)
        kept = sorted(t for t, c in freq.items() if c >= min_count)
        return cls(kept, min_count)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, tok):
        return tok in self.stoi

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def to_text(self) -> str:
        return f"{self.min_count}\n" + "\n".join(self.itos[len(SPECIALS) :]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Vocab":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines[1:], int(lines[0]))

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]


def build_vocab(corpus, min_count: int = 1) -> tuple[Vocab, Vocab]:
    """(source vocab, target vocab) from a ParallelCorpus or list of SentencePairs."""
    pairs = list(corpus)
    return (
        Vocab.build((p.source for p in pairs), min_count),
        Vocab.build((p.target for p in pairs), min_count),
    )


@dataclass(frozen=True)
class ModelDims:
    src_vocab: int
    tgt_vocab: int
    embed: int = 64
    hidden: int = 128
    feed_context: bool = True

    @property
    def dec_input(self) -> int:
        return self.embed + (self.hidden if self.feed_context else 0)


# order in which tensors are listed, updated and serialized
PARAM_NAMES = (
    "src_emb", "tgt_emb",
    "enc_W", "enc_U", "enc_b",
    "dec_W", "dec_U", "dec_b",
    "out_W", "out_b",
)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Seq2SeqModel:
    def __init__(self, dims: ModelDims, params: dict[str, np.ndarray], src_vocab: Vocab, tgt_vocab: Vocab,
                 reverse_source: bool = True):
        self.dims = dims
        self.params = params
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.reverse_source = reverse_source

    @classmethod
    def init(cls, src_vocab: Vocab, tgt_vocab: Vocab, embed=64, hidden=128, feed_context=True, seed=0,
             scale=0.1, dtype=np.float64, reverse_source=True) -> "Seq2SeqModel":
        dims = ModelDims(len(src_vocab), len(tgt_vocab), embed, hidden, feed_context)
        rng = np.random.default_rng(seed)
        shapes = cls.shapes(dims)
        params = {}
        for name in PARAM_NAMES:
            if name.endswith("_b"):
                params[name] = np.zeros(shapes[name], dtype=dtype)
            else:
                params[name] = rng.uniform(-scale, scale, shapes[name]).astype(dtype)
        params["src_emb"][PAD_ID] = 0
        params["tgt_emb"][PAD_ID] = 0
        return cls(dims, params, src_vocab, tgt_vocab, reverse_source)

    @staticmethod
    def shapes(dims: ModelDims) -> dict[str, tuple[int, ...]]:
        E, H = dims.embed, dims.hidden
        return {
            "src_emb": (dims.src_vocab, E),
            "tgt_emb": (dims.tgt_vocab, E),
            "enc_W": (E, 3 * H),
            "enc_U": (H, 3 * H),
            "enc_b": (3 * H,),
            "dec_W": (dims.dec_input, 3 * H),
            "dec_U": (H, 3 * H),
            "dec_b": (3 * H,),
            "out_W": (H, dims.tgt_vocab),
            "out_b": (dims.tgt_vocab,),
        }

    @property
    def dtype(self):
        return self.params["out_W"].dtype

    def copy(self) -> "Seq2SeqModel":
        return Seq2SeqModel(self.dims, {k: v.copy() for k, v in self.params.items()}, self.src_vocab,
                            self.tgt_vocab, self.reverse_source)

    def astype(self, dtype) -> "Seq2SeqModel":
        return Seq2SeqModel(self.dims, {k: v.astype(dtype) for k, v in self.params.items()}, self.src_vocab,
                            self.tgt_vocab, self.reverse_source)

    # -- serialization ---------------------------------------------------
    MAGIC = b"VNDS2S\x00\x01"
    VERSION = 1

    def save(self, path: str | Path) -> None:
        """Header, little-endian float64 tensors in PARAM_NAMES order, then the two vocab texts."""
        src_txt = self.src_vocab.to_text().encode("utf-8")
        tgt_txt = self.tgt_vocab.to_text().encode("utf-8")
        header = {
            "dims": asdict(self.dims),
            "reverse_source": self.reverse_source,
            "tensors": [[name, list(self.params[name].shape)] for name in PARAM_NAMES],
            "src_vocab_sha": self.src_vocab.digest(),
            "tgt_vocab_sha": self.tgt_vocab.digest(),
            "src_vocab_bytes": len(src_txt),
            "tgt_vocab_bytes": len(tgt_txt),
        }
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<II", self.VERSION, len(hb)))
            fh.write(hb)
            for name in PARAM_NAMES:
                fh.write(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())
            fh.write(src_txt)
            fh.write(tgt_txt)

    @classmethod
    def load(cls, path: str | Path) -> "Seq2SeqModel":
        data = Path(path).read_bytes()
        buf = io.BytesIO(data)
        if buf.read(len(cls.MAGIC)) != cls.MAGIC:
            raise ModelFormatError(f"{path}: header: bad magic, not a seq2seq model file")
        try:
            version, hlen = struct.unpack("<II", buf.read(8))
        except struct.error:
            raise ModelFormatError(f"{path}: header: truncated") from None
        if version != cls.VERSION:
            raise ModelFormatError(f"{path}: header: unsupported version {version}")
        try:
            header = json.loads(buf.read(hlen).decode("utf-8"))
            dims = ModelDims(**header["dims"])
        except (ValueError, KeyError, TypeError) as e:
            raise ModelFormatError(f"{path}: header: {e}") from None
        expected = cls.shapes(dims)
        params = {}
        for name, shape in header["tensors"]:
            if tuple(shape) != expected.get(name):
                raise ModelFormatError(f"{path}: tensor {name}: shape {shape} does not match dimensions")
            n = int(np.prod(shape))
            raw = buf.read(8 * n)
            if len(raw) != 8 * n:
                raise ModelFormatError(f"{path}: tensor {name}: truncated")
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
        if set(params) != set(PARAM_NAMES):
            raise ModelFormatError(f"{path}: tensors: missing {sorted(set(PARAM_NAMES) - set(params))}")
        vocabs = []
        for side in ("src", "tgt"):
            raw = buf.read(header[f"{side}_vocab_bytes"])
            try:
                v = Vocab.from_text(raw.decode("utf-8"))
            except (UnicodeDecodeError, ValueError, IndexError):
                raise ModelFormatError(f"{path}: {side} vocab: unreadable") from None
            if v.digest() != header[f"{side}_vocab_sha"]:
                raise ModelFormatError(f"{path}: {side} vocab: hash mismatch")
            vocabs.append(v)
        return cls(dims, params, vocabs[0], vocabs[1], header.get("reverse_source", True))


# -- batched GRU ------------------------------------------------------------

def _gru_forward(W, U, b, xs, mask, h0):
    """Run a GRU over xs (T, B, D) with mask (T, B). Returns hidden states and a cache."""
    T = xs.shape[0]
    H = U.shape[0]
    Uzr, Un = U[:, : 2 * H], U[:, 2 * H :]
    ax = xs @ W + b  # (T, B, 3H) input contributions for all steps at once
    h = h0
    hs, cache = [], []
    for t in range(T):
        a = ax[t]
        zr = _sigmoid(a[:, : 2 * H] + h @ Uzr)
        z, r = zr[:, :H], zr[:, H:]
        rh = r * h
        n = np.tanh(a[:, 2 * H :] + rh @ Un)
        h_new = (1.0 - z) * n + z * h
        m = mask[t][:, None]
        h_next = m * h_new + (1.0 - m) * h
        cache.append((h, z, r, n, rh))
        hs.append(h_next)
        h = h_next
    return np.stack(hs) if hs else np.zeros((0,) + h0.shape, h0.dtype), cache


def _gru_backward(W, U, xs, mask, cache, dhs, dh_last):
    """Backprop through _gru_forward. dhs (T, B, H) are gradients on every output state."""
    T = xs.shape[0]
    H = U.shape[0]
    Uz, Ur, Un = U[:, :H], U[:, H : 2 * H], U[:, 2 * H :]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[1], dtype=W.dtype)
    dxs = np.zeros_like(xs)
    dh = dh_last.copy()
    da_all = np.empty(xs.shape[:2] + (3 * H,), dtype=W.dtype)
    for t in range(T - 1, -1, -1):
        h, z, r, n, rh = cache[t]
        g = dh + dhs[t]
        m = mask[t][:, None]
        g_new = m * g
        dh_prev = (1.0 - m) * g + g_new * z
        dz = g_new * (h - n)
        dan = g_new * (1.0 - z) * (1.0 - n * n)
        drh = dan @ Un.T
        dU[:, 2 * H :] += rh.T @ dan
        dr = drh * h
        dh_prev += drh * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        dU[:, :H] += h.T @ daz
        dU[:, H : 2 * H] += h.T @ dar
        dh_prev += daz @ Uz.T + dar @ Ur.T
        da_all[t, :, :H] = daz
        da_all[t, :, H : 2 * H] = dar
        da_all[t, :, 2 * H :] = dan
        dh = dh_prev
    if T:
        flat_x = xs.reshape(-1, xs.shape[-1])
        flat_a = da_all.reshape(-1, 3 * H)
        dW += flat_x.T @ flat_a
        db += flat_a.sum(0)
        dxs = (flat_a @ W.T).reshape(xs.shape)
    return dW, dU, db, dxs, dh


# -- batching ---------------------------------------------------------------

@dataclass
class Batch:
    src: np.ndarray  # (Ts, B) int
    src_mask: np.ndarray  # (Ts, B) float
    dec_in: np.ndarray  # (Tt, B)
    dec_out: np.ndarray  # (Tt, B)
    tgt_mask: np.ndarray  # (Tt, B)

    @property
    def n_tokens(self) -> float:
        return float(self.tgt_mask.sum())


def make_batch(model: Seq2SeqModel, pairs, dtype=None) -> Batch:
    dtype = dtype or model.dtype
    srcs = [model.src_vocab.encode(p[0]) for p in pairs]
    if model.reverse_source:
        srcs = [s[::-1] for s in srcs]
    tgts = [model.tgt_vocab.encode(p[1]) for p in pairs]
    B = len(pairs)
    Ts = max(1, max(len(s) for s in srcs))
    Tt = max(len(t) for t in tgts) + 1
    src = np.full((Ts, B), PAD_ID, dtype=np.int64)
    src_mask = np.zeros((Ts, B), dtype=dtype)
    dec_in = np.full((Tt, B), PAD_ID, dtype=np.int64)
    dec_out = np.full((Tt, B), PAD_ID, dtype=np.int64)
    tgt_mask = np.zeros((Tt, B), dtype=dtype)
    for b, (s, t) in enumerate(zip(srcs, tgts)):
        if model.reverse_source:
            # right-align reversed sources so every sequence ends at the last step
            src[Ts - len(s) :, b] = s
            src_mask[Ts - len(s) :, b] = 1
        else:
            src[: len(s), b] = s
            src_mask[: len(s), b] = 1
        dec_in[: len(t) + 1, b] = [BOS_ID] + t
        dec_out[: len(t) + 1, b] = t + [EOS_ID]
        tgt_mask[: len(t) + 1, b] = 1
    return Batch(src, src_mask, dec_in, dec_out, tgt_mask)


def _as_pairs(corpus):
    return [(tuple(p.source), tuple(p.target)) if hasattr(p, "source") else (tuple(p[0]), tuple(p[1]))
            for p in corpus]


# -- model math -------------------------------------------------------------

def encode(model: Seq2SeqModel, source_ids) -> tuple[np.ndarray, np.ndarray]:
    """Run the encoder on one sentence of source indices; returns (s, per-step states)."""
    p = model.params
    ids = np.asarray(source_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= model.dims.src_vocab):
        raise IndexError(f"source index out of range [0, {model.dims.src_vocab})")
    if model.reverse_source:
        ids = ids[::-1]
    xs = p["src_emb"][ids][:, None, :]
    mask = np.ones((len(ids), 1), dtype=model.dtype)
    h0 = np.zeros((1, model.dims.hidden), dtype=model.dtype)
    hs, _ = _gru_forward(p["enc_W"], p["enc_U"], p["enc_b"], xs, mask, h0)
    s = hs[-1, 0] if len(ids) else h0[0]
    return s, hs[:, 0]


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def decode_step(model: Seq2SeqModel, prev_index: int, state) -> tuple[np.ndarray, tuple]:
    """One decoder step. ``state`` is ``(h, s)``; returns (p(next token), new state)."""
    h, s = state
    p = model.params
    H = model.dims.hidden
    x = p["tgt_emb"][prev_index]
    if model.dims.feed_context:
        x = np.concatenate([x, s])
    a = x @ p["dec_W"] + p["dec_b"]
    U = p["dec_U"]
    zr = _sigmoid(a[: 2 * H] + h @ U[:, : 2 * H])
    z, r = zr[:H], zr[H:]
    n = np.tanh(a[2 * H :] + (r * h) @ U[:, 2 * H :])
    h_new = (1.0 - z) * n + z * h
    probs = _softmax(h_new @ p["out_W"] + p["out_b"])
    return probs, (h_new, s)


def initial_state(model: Seq2SeqModel, source_tokens: Sequence[str]):
    s, _ = encode(model, model.src_vocab.encode(source_tokens))
    return (s.copy(), s)


def loss_and_grads(model: Seq2SeqModel, batch: Batch, need_grads: bool = True):
    """Mean per-token negative log-likelihood under teacher forcing, and its gradient."""
    p = model.params
    dims = model.dims
    H = dims.hidden
    B = batch.src.shape[1]
    dt = model.dtype

    xs_enc = p["src_emb"][batch.src]
    h0 = np.zeros((B, H), dtype=dt)
    enc_hs, enc_cache = _gru_forward(p["enc_W"], p["enc_U"], p["enc_b"], xs_enc, batch.src_mask, h0)
    s = enc_hs[-1]

    emb_dec = p["tgt_emb"][batch.dec_in]
    Tt = emb_dec.shape[0]
    if dims.feed_context:
        xs_dec = np.concatenate([emb_dec, np.broadcast_to(s, (Tt, B, H))], axis=-1)
    else:
        xs_dec = emb_dec
    dec_hs, dec_cache = _gru_forward(p["dec_W"], p["dec_U"], p["dec_b"], xs_dec, batch.tgt_mask, s)

    logits = dec_hs @ p["out_W"] + p["out_b"]  # (Tt, B, V)
    logits -= logits.max(axis=-1, keepdims=True)
    logZ = np.log(np.exp(logits).sum(axis=-1))
    gold = np.take_along_axis(logits, batch.dec_out[..., None], axis=-1)[..., 0]
    nll = (logZ - gold) * batch.tgt_mask
    n_tok = batch.n_tokens
    loss = float(nll.sum() / n_tok)
    if not need_grads:
        return loss, None

    probs = np.exp(logits - logZ[..., None])
    dlogits = probs
    np.put_along_axis(dlogits, batch.dec_out[..., None],
                      np.take_along_axis(dlogits, batch.dec_out[..., None], axis=-1) - 1.0, axis=-1)
    dlogits *= (batch.tgt_mask / n_tok)[..., None]

    g = {}
    flat_h = dec_hs.reshape(-1, H)
    flat_dl = dlogits.reshape(-1, dims.tgt_vocab)
    g["out_W"] = flat_h.T @ flat_dl
    g["out_b"] = flat_dl.sum(0)
    d_dec_hs = dlogits @ p["out_W"].T

    dW, dU, db, dxs_dec, ds = _gru_backward(p["dec_W"], p["dec_U"], xs_dec, batch.tgt_mask, dec_cache,
                                            d_dec_hs, np.zeros((B, H), dtype=dt))
    g["dec_W"], g["dec_U"], g["dec_b"] = dW, dU, db
    if dims.feed_context:
        ds = ds + dxs_dec[..., dims.embed :].sum(0)
    d_emb_dec = dxs_dec[..., : dims.embed]
    g["tgt_emb"] = np.zeros_like(p["tgt_emb"])
    np.add.at(g["tgt_emb"], batch.dec_in.reshape(-1), d_emb_dec.reshape(-1, dims.embed))

    d_enc_hs = np.zeros_like(enc_hs)
    dW, dU, db, dxs_enc, _ = _gru_backward(p["enc_W"], p["enc_U"], xs_enc, batch.src_mask, enc_cache,
                                           d_enc_hs, ds)
    g["enc_W"], g["enc_U"], g["enc_b"] = dW, dU, db
    g["src_emb"] = np.zeros_like(p["src_emb"])
    np.add.at(g["src_emb"], batch.src.reshape(-1), dxs_enc.reshape(-1, dims.embed))
    # padding rows stay fixed at zero
    g["src_emb"][PAD_ID] = 0
    g["tgt_emb"][PAD_ID] = 0
    return loss, g


def corpus_loss(model: Seq2SeqModel, pairs, batch_size: int = 64) -> float:
    total, n = 0.0, 0.0
    for k in range(0, len(pairs), batch_size):
        batch = make_batch(model, pairs[k : k + batch_size])
        loss, _ = loss_and_grads(model, batch, need_grads=False)
        total += loss * batch.n_tokens
        n += batch.n_tokens
    return total / n


# -- training ---------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 1.0
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 3
    clip_norm: float = 5.0
    seed: int = 0
    embed: int = 64
    hidden: int = 128
    feed_context: bool = True
    reverse_source: bool = True
    min_count: int = 1
    init_scale: float = 0.1
    lr_decay: float = 0.5  # multiply the learning rate when dev loss stops improving
    dtype: str = "float64"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch size must be >= 1 and max epochs >= 0")


@dataclass
class TrainResult:
    model: Seq2SeqModel
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    seconds: float = 0.0


def _batches(pairs, batch_size, rng):
    """Length-bucketed batches in random order."""
    keys = rng.random(len(pairs))
    order = sorted(range(len(pairs)), key=lambda i: (len(pairs[i][1]), keys[i]))
    chunks = [order[k : k + batch_size] for k in range(0, len(order), batch_size)]
    rng.shuffle(chunks)
    return chunks


def sgd_step(model: Seq2SeqModel, grads: dict, lr: float, clip_norm: float | None) -> float:
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    scale = lr
    if clip_norm and norm > clip_norm:
        scale *= clip_norm / norm
    for name in PARAM_NAMES:
        model.params[name] -= scale * grads[name]
    return norm


def train_seq2seq(corpus, dev, config: TrainConfig = TrainConfig(), model: Seq2SeqModel | None = None,
                  on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """SGD with gradient clipping and early stopping on dev loss.

    Returns the parameters from the epoch with the lowest dev loss. The
    learning rate is multiplied by ``lr_decay`` after every evaluation that
    does not improve on the best dev loss; training stops after ``patience``
    such evaluations in a row.
    """
    pairs = _as_pairs(corpus)
    dev_pairs = _as_pairs(dev)
    if not pairs or not dev_pairs:
        raise ValueError("training and dev corpora must be non-empty")
    dtype = np.dtype(config.dtype)
    if model is None:
        sv = Vocab.build((p[0] for p in pairs), config.min_count)
        tv = Vocab.build((p[1] for p in pairs), config.min_count)
        model = Seq2SeqModel.init(sv, tv, config.embed, config.hidden, config.feed_context, config.seed,
                                  config.init_scale, dtype, config.reverse_source)
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()
    lr = config.learning_rate
    best = (corpus_loss(model, dev_pairs), model.copy(), 0)
    history = [{"epoch": 0, "train_loss": None, "dev_loss": best[0], "lr": lr}]
    bad = 0
    step = 0
    for epoch in range(1, config.max_epochs + 1):
        total, n_tok = 0.0, 0.0
        for idx in _batches(pairs, config.batch_size, rng):
            batch = make_batch(model, [pairs[i] for i in idx])
            loss, grads = loss_and_grads(model, batch)
            step += 1
            if not math.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}, step {step}")
            sgd_step(model, grads, lr, config.clip_norm)
            total += loss * batch.n_tokens
            n_tok += batch.n_tokens
        dev_loss = corpus_loss(model, dev_pairs)
        if not math.isfinite(dev_loss):
            raise TrainingDiverged(f"dev loss became {dev_loss} at epoch {epoch}, step {step}")
        entry = {"epoch": epoch, "train_loss": total / n_tok, "dev_loss": dev_loss, "lr": lr}
        history.append(entry)
        if on_epoch:
            on_epoch(entry)
        log.info("epoch %d train %.4f dev %.4f lr %.3g", epoch, entry["train_loss"], dev_loss, lr)
        if dev_loss < best[0]:
            best = (dev_loss, model.copy(), epoch)
            bad = 0
        else:
            bad += 1
            lr *= config.lr_decay
            if bad >= config.patience:
                break
    return TrainResult(best[1], history, best[2], time.perf_counter() - t0)


# -- inference --------------------------------------------------------------

def restore_neural(model: Seq2SeqModel, source: Sequence[str], beam: int = 1) -> list[str]:
    """Greedy (beam=1) or length-normalized beam search, capped at 2x source length.

    Emitted unknown symbols are replaced by the source token at the same position.
    """
    source = list(source)
    cap = 2 * len(source)
    if cap == 0:
        return []
    state0 = initial_state(model, source)
    if beam <= 1:
        ids, state, prev = [], state0, BOS_ID
        for _ in range(cap):
            probs, state = decode_step(model, prev, state)
            prev = int(np.argmax(probs))
            if prev == EOS_ID:
                break
            ids.append(prev)
    else:
        ids = _beam_search(model, state0, beam, cap)
    out = []
    for j, i in enumerate(ids):
        if i == UNK_ID or i < len(SPECIALS):
            if j < len(source):
                out.append(source[j])
        else:
            out.append(model.tgt_vocab.itos[i])
    return out


def _beam_search(model, state0, beam, cap):
    live = [(0.0, [], BOS_ID, state0)]
    finished = []
    for _ in range(cap):
        cand = []
        for score, ids, prev, state in live:
            probs, nstate = decode_step(model, prev, state)
            logp = np.log(probs)
            top = np.argsort(-logp, kind="stable")[:beam]
            for t in top:
                cand.append((score + float(logp[t]), ids + [int(t)], int(t), nstate))
        cand.sort(key=lambda c: (-c[0], c[1]))
        live = []
        for c in cand:
            if c[2] == EOS_ID:
                finished.append((c[0] / (len(c[1])), c[1][:-1]))
            else:
                live.append(c)
            if len(live) >= beam:
                break
        if not live or len(finished) >= beam:
            break
    finished += [(s / max(1, len(ids)), ids) for s, ids, _, _ in live]
    finished.sort(key=lambda f: (-f[0], f[1]))
    return finished[0][1]


# -- verification -----------------------------------------------------------

def gradient_check(model: Seq2SeqModel, pair, eps: float = 1e-5, n_coords: int = 200, seed: int = 0,
                   grad_fn: Callable | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Coordinates are drawn evenly from every parameter tensor (for embeddings,
    only from rows the sample touches). The finite differences are evaluated
    on an extended-precision copy of the parameters so that roundoff in the
    loss does not swamp small gradients. Relative error is
    ``|a - n| / max(|a| + |n|, 1e-12)``.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-6, 1e-4]")
    if model.dtype != np.float64:
        raise ValueError("gradient checks need float64 parameters")
    grad_fn = grad_fn or loss_and_grads
    batch = make_batch(model, _as_pairs([pair]))
    _, grads = grad_fn(model, batch)
    probe = model.astype(np.longdouble)
    probe_batch = make_batch(probe, _as_pairs([pair]))
    rng = np.random.default_rng(seed)
    rows = {"src_emb": np.unique(batch.src[batch.src_mask > 0]), "tgt_emb": np.unique(batch.dec_in[batch.tgt_mask > 0])}
    per = max(1, math.ceil(n_coords / len(PARAM_NAMES)))
    worst = 0.0
    for name in PARAM_NAMES:
        theta = probe.params[name]
        for _ in range(per):
            if name in rows:
                idx = (int(rng.choice(rows[name])), int(rng.integers(theta.shape[1])))
            else:
                idx = tuple(int(rng.integers(d)) for d in theta.shape)
            old = theta[idx]
            theta[idx] = old + eps
            lp = _exact_loss(probe, probe_batch)
            theta[idx] = old - eps
            lm = _exact_loss(probe, probe_batch)
            theta[idx] = old
            num = float((lp - lm) / (2 * eps))
            ana = float(grads[name][idx])
            worst = max(worst, abs(ana - num) / max(abs(ana) + abs(num), 1e-12))
    return worst


def _exact_loss(model, batch):
    p = model.params
    B = batch.src.shape[1]
    H = model.dims.hidden
    h0 = np.zeros((B, H), dtype=model.dtype)
    enc_hs, _ = _gru_forward(p["enc_W"], p["enc_U"], p["enc_b"], p["src_emb"][batch.src], batch.src_mask, h0)
    s = enc_hs[-1]
    xs = p["tgt_emb"][batch.dec_in]
    if model.dims.feed_context:
        xs = np.concatenate([xs, np.broadcast_to(s, (xs.shape[0], B, H))], axis=-1)
    dec_hs, _ = _gru_forward(p["dec_W"], p["dec_U"], p["dec_b"], xs, batch.tgt_mask, s)
    logits = dec_hs @ p["out_W"] + p["out_b"]
    logits = logits - logits.max(axis=-1, keepdims=True)
    logZ = np.log(np.exp(logits).sum(axis=-1))
    gold = np.take_along_axis(logits, batch.dec_out[..., None], axis=-1)[..., 0]
    return ((logZ - gold) * batch.tgt_mask).sum() / batch.tgt_mask.sum()
