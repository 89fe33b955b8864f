"""Character encoders, the CSC model, freezing and checkpoints.

Two encoder families share one interface:

* :class:`TransformerEncoder` -- a small post-LN transformer encoder written
  directly in numpy, with a hand-derived backward pass.
* :class:`LookupEncoder` -- a bare embedding table, handy in tests.

Both expose ``forward(ids, lengths) -> (reps, cache)`` and
``backward(dreps, cache) -> grads``; ``encode`` wraps ``forward`` for a
single sentence.  :func:`freeze` returns a read-only copy, which is what
the knowledge encoders are during training.
"""

from __future__ import annotations

import copy
import json
import os
import shutil
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Vocab",
    "RepSequence",
    "EncoderConfig",
    "EncoderLengthError",
    "CheckpointError",
    "TransformerEncoder",
    "LookupEncoder",
    "FrozenEncoder",
    "CscModel",
    "build_encoder",
    "freeze",
    "save_checkpoint",
    "load_checkpoint",
    "load_model",
    "write_array",
    "read_array",
]

CHECKPOINT_VERSION = 1
MANIFEST_NAME = "manifest.json"
_ARRAY_MAGIC = b"F32A"


class EncoderLengthError(ValueError):
    """Sentence longer than the encoder's ``max_length``."""


class CheckpointError(ValueError):
    pass


class Vocab:
    """Ordered characters with two reserved ids: ``PAD`` (0) and ``UNK`` (1)."""

    PAD = 0
    UNK = 1
    SPECIALS = ("[PAD]", "[UNK]")

    def __init__(self, chars: Sequence[str]):
        seen = dict.fromkeys(c for c in chars if c not in self.SPECIALS)
        for c in seen:
            if len(c) != 1:
                raise ValueError(f"vocab entries must be single characters, got {c!r}")
        self.chars = tuple(seen)
        self.itos = self.SPECIALS + self.chars
        self.stoi = {c: i for i, c in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def __contains__(self, char):
        return char in self.stoi and self.stoi[char] >= len(self.SPECIALS)

    def id_of(self, char: str) -> int:
        return self.stoi.get(char, self.UNK)

    def ids(self, sentence: str) -> np.ndarray:
        return np.array([self.id_of(c) for c in sentence], dtype=np.int64)

    def char_of(self, idx: int) -> str:
        return self.itos[idx]

    @classmethod
    def from_texts(cls, texts, extra=()) -> "Vocab":
        chars = set(extra)
        for t in texts:
            chars.update(t)
        return cls(sorted(chars))


@dataclass
class RepSequence:
    """A ``T x h`` representation matrix; rows past ``valid_length`` are padding."""

    values: np.ndarray
    valid_length: int

    @property
    def rows(self) -> np.ndarray:
        return self.values[: self.valid_length]

    @property
    def hidden_size(self) -> int:
        return self.values.shape[-1]


@dataclass
class EncoderConfig:
    vocab: tuple = ()
    hidden_size: int = 64
    layers: int = 2
    heads: int = 2
    max_length: int = 128
    ffn_size: int = 0  # 0 -> 4 * hidden_size
    seed: int = 0
    dtype: str = "float32"
    kind: str = "transformer"

    def __post_init__(self):
        self.vocab = tuple(self.vocab)
        if self.kind not in ("transformer", "lookup"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.hidden_size < 1 or self.max_length < 1:
            raise ValueError("hidden_size and max_length must be >= 1")
        if self.kind == "transformer":
            if self.heads < 1 or self.hidden_size % self.heads:
                raise ValueError(
                    f"hidden_size {self.hidden_size} is not divisible by heads {self.heads}"
                )
            if self.layers < 0:
                raise ValueError("layers must be >= 0")
        if self.ffn_size <= 0:
            self.ffn_size = 4 * self.hidden_size

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vocab"] = list(self.vocab)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


# -- layer primitives ------------------------------------------------------

_LN_EPS = 1e-5
_GELU_C = np.sqrt(2.0 / np.pi)


def _ln_fwd(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + _LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def _ln_bwd(dy, cache):
    xhat, inv, g = cache
    red = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(red)
    db = dy.sum(red)
    dxhat = dy * g
    n = dy.shape[-1]
    dx = inv / n * (
        n * dxhat - dxhat.sum(-1, keepdims=True) - xhat * (dxhat * xhat).sum(-1, keepdims=True)
    )
    return dx, dg, db


def _gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u**3))
    return 0.5 * u * (1.0 + t), t


def _gelu_grad(u, t):
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * u * u)


def _softmax(s):
    e = np.exp(s - s.max(-1, keepdims=True))
    return e / e.sum(-1, keepdims=True)


def _matgrad(x, dy):
    """Weight gradient of ``y = x @ W`` summed over all leading axes."""
    return x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])


_DECAYED = ("tok_emb", "pos_emb", "wq", "wk", "wv", "wo", "w1", "w2", "weight")


def decays(name: str) -> bool:
    """Whether weight decay applies (matrices yes; biases and LayerNorm no)."""
    return name.rsplit(".", 1)[-1] in _DECAYED


# -- encoders --------------------------------------------------------------


class _EncoderBase:
    config: EncoderConfig
    params: dict

    def __init__(self, config: EncoderConfig):
        self.config = config
        self.vocab = Vocab(config.vocab)
        self.dtype = np.dtype(config.dtype)

    @property
    def hidden_size(self) -> int:
        return self.config.hidden_size

    @property
    def max_length(self) -> int:
        return self.config.max_length

    def batch_ids(self, sentences: Sequence[str], truncate: bool = False):
        if truncate:
            sentences = [s[: self.max_length] for s in sentences]
        for s in sentences:
            if len(s) > self.max_length:
                raise EncoderLengthError(
                    f"sentence of length {len(s)} exceeds max_length {self.max_length}"
                )
        lengths = np.array([len(s) for s in sentences], dtype=np.int64)
        T = int(lengths.max()) if len(sentences) else 0
        ids = np.full((len(sentences), T), Vocab.PAD, dtype=np.int64)
        for i, s in enumerate(sentences):
            ids[i, : len(s)] = self.vocab.ids(s)
        return ids, lengths

    def encode_batch(self, sentences: Sequence[str], truncate: bool = False):
        ids, lengths = self.batch_ids(sentences, truncate)
        out, _ = self.forward(ids, lengths)
        return out, lengths

    def encode(self, sentence: str, truncate: bool = False) -> RepSequence:
        out, lengths = self.encode_batch([sentence], truncate)
        return RepSequence(out[0], int(lengths[0]))

    def copy(self):
        return copy.deepcopy(self)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())


class LookupEncoder(_EncoderBase):
    """``rep[t] = tok_emb[id_t]``: no context, no positions."""

    def __init__(self, config: EncoderConfig, table: np.ndarray | None = None):
        super().__init__(config)
        V, h = len(self.vocab), config.hidden_size
        if table is None:
            rng = np.random.default_rng(config.seed)
            bound = 1.0 / np.sqrt(h)
            table = rng.uniform(-bound, bound, size=(V, h))
        table = np.asarray(table, dtype=self.dtype)
        if table.shape != (V, h):
            raise ValueError(f"lookup table shape {table.shape} != {(V, h)}")
        self.params = {"tok_emb": table}

    def forward(self, ids, lengths):
        return self.params["tok_emb"][ids], ids

    def backward(self, dout, ids):
        d = np.zeros_like(self.params["tok_emb"])
        np.add.at(d, ids.reshape(-1), dout.reshape(-1, dout.shape[-1]))
        return {"tok_emb": d}


class TransformerEncoder(_EncoderBase):
    """Post-LN transformer encoder (BERT layout) with learned positions."""

    def __init__(self, config: EncoderConfig, params: dict | None = None):
        super().__init__(config)
        if config.kind != "transformer":
            raise ValueError("TransformerEncoder needs kind='transformer'")
        self.params = self._init_params() if params is None else dict(params)

    def _shapes(self) -> dict:
        h, f, V, L = (
            self.config.hidden_size,
            self.config.ffn_size,
            len(self.vocab),
            self.config.max_length,
        )
        shapes = {"tok_emb": (V, h), "pos_emb": (L, h), "emb_ln.g": (h,), "emb_ln.b": (h,)}
        for l in range(self.config.layers):
            p = f"layers.{l}."
            for w in ("wq", "wk", "wv", "wo"):
                shapes[p + "attn." + w] = (h, h)
                shapes[p + "attn.b" + w[1]] = (h,)
            shapes.update(
                {
                    p + "ln1.g": (h,),
                    p + "ln1.b": (h,),
                    p + "ffn.w1": (h, f),
                    p + "ffn.b1": (f,),
                    p + "ffn.w2": (f, h),
                    p + "ffn.b2": (h,),
                    p + "ln2.g": (h,),
                    p + "ln2.b": (h,),
                }
            )
        return shapes

    def _init_params(self) -> dict:
        rng = np.random.default_rng(self.config.seed)
        params = {}
        for name, shape in self._shapes().items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf == "g":
                arr = np.ones(shape)
            elif len(shape) == 1:
                arr = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(self.config.hidden_size if "emb" in name else shape[0])
                arr = rng.uniform(-bound, bound, size=shape)
            params[name] = arr.astype(self.dtype)
        return params

    def expected_shapes(self) -> dict:
        return self._shapes()

    # forward / backward

    def _split(self, x):
        B, T, _ = x.shape
        H = self.config.heads
        return x.reshape(B, T, H, -1).transpose(0, 2, 1, 3)

    @staticmethod
    def _merge(x):
        B, H, T, d = x.shape
        return x.transpose(0, 2, 1, 3).reshape(B, T, H * d)

    def forward(self, ids: np.ndarray, lengths: np.ndarray):
        p = self.params
        B, T = ids.shape
        if T > self.config.max_length:
            raise EncoderLengthError(f"length {T} exceeds max_length {self.config.max_length}")
        mask = np.arange(T)[None, :] < np.asarray(lengths)[:, None]
        bias = np.where(mask, 0.0, -1e9).astype(self.dtype)[:, None, None, :]
        x = p["tok_emb"][ids] + p["pos_emb"][:T]
        x, emb_ln = _ln_fwd(x, p["emb_ln.g"], p["emb_ln.b"])
        layer_caches = []
        scale = 1.0 / np.sqrt(self.config.hidden_size // self.config.heads)
        for l in range(self.config.layers):
            pre = f"layers.{l}."
            q = self._split(x @ p[pre + "attn.wq"] + p[pre + "attn.bq"])
            k = self._split(x @ p[pre + "attn.wk"] + p[pre + "attn.bk"])
            v = self._split(x @ p[pre + "attn.wv"] + p[pre + "attn.bv"])
            a = _softmax(q @ k.transpose(0, 1, 3, 2) * scale + bias)
            ctx = self._merge(a @ v)
            o = ctx @ p[pre + "attn.wo"] + p[pre + "attn.bo"]
            y, ln1 = _ln_fwd(x + o, p[pre + "ln1.g"], p[pre + "ln1.b"])
            u = y @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"]
            gu, t = _gelu(u)
            f = gu @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"]
            out, ln2 = _ln_fwd(y + f, p[pre + "ln2.g"], p[pre + "ln2.b"])
            layer_caches.append((x, q, k, v, a, ctx, y, u, t, gu, ln1, ln2))
            x = out
        return x, (ids, emb_ln, layer_caches, scale)

    def backward(self, dout: np.ndarray, cache) -> dict:
        p = self.params
        ids, emb_ln, layer_caches, scale = cache
        grads = {}
        dx = dout
        for l in reversed(range(self.config.layers)):
            pre = f"layers.{l}."
            x, q, k, v, a, ctx, y, u, t, gu, ln1, ln2 = layer_caches[l]
            dr2, grads[pre + "ln2.g"], grads[pre + "ln2.b"] = _ln_bwd(dx, ln2)
            grads[pre + "ffn.w2"] = _matgrad(gu, dr2)
            grads[pre + "ffn.b2"] = dr2.sum((0, 1))
            du = (dr2 @ p[pre + "ffn.w2"].T) * _gelu_grad(u, t)
            grads[pre + "ffn.w1"] = _matgrad(y, du)
            grads[pre + "ffn.b1"] = du.sum((0, 1))
            dy = dr2 + du @ p[pre + "ffn.w1"].T
            dr1, grads[pre + "ln1.g"], grads[pre + "ln1.b"] = _ln_bwd(dy, ln1)
            grads[pre + "attn.wo"] = _matgrad(ctx, dr1)
            grads[pre + "attn.bo"] = dr1.sum((0, 1))
            dctx = self._split(dr1 @ p[pre + "attn.wo"].T)
            da = dctx @ v.transpose(0, 1, 3, 2)
            dv = a.transpose(0, 1, 3, 2) @ dctx
            ds = a * (da - (da * a).sum(-1, keepdims=True)) * scale
            dq = self._merge(ds @ k)
            dk = self._merge(ds.transpose(0, 1, 3, 2) @ q)
            dv = self._merge(dv)
            dx = dr1.copy()
            for name, dz in (("q", dq), ("k", dk), ("v", dv)):
                grads[pre + "attn.w" + name] = _matgrad(x, dz)
                grads[pre + "attn.b" + name] = dz.sum((0, 1))
                dx += dz @ p[pre + "attn.w" + name].T
        dx, grads["emb_ln.g"], grads["emb_ln.b"] = _ln_bwd(dx, emb_ln)
        dtok = np.zeros_like(p["tok_emb"])
        np.add.at(dtok, ids.reshape(-1), dx.reshape(-1, dx.shape[-1]))
        grads["tok_emb"] = dtok
        dpos = np.zeros_like(p["pos_emb"])
        dpos[: ids.shape[1]] = dx.sum(0)
        grads["pos_emb"] = dpos
        return grads


def build_encoder(config: EncoderConfig, params: dict | None = None):
    if config.kind == "lookup":
        return LookupEncoder(config, None if params is None else params["tok_emb"])
    return TransformerEncoder(config, params)


class FrozenEncoder:
    """Read-only snapshot of an encoder.

    Parameters are copied and marked non-writeable, so no optimizer can
    touch them.  Encodings of single sentences are memoised.
    """

    def __init__(self, encoder, cache_size: int = 50_000):
        if isinstance(encoder, FrozenEncoder):
            encoder = encoder._inner
        inner = encoder.copy()
        for arr in inner.params.values():
            arr.flags.writeable = False
        self._inner = inner
        self._cache: dict = {}
        self._cache_size = cache_size

    def __getattr__(self, name):
        if name in ("forward", "config", "vocab", "hidden_size", "max_length", "batch_ids", "dtype"):
            return getattr(self._inner, name)
        raise AttributeError(name)

    @property
    def params(self) -> dict:
        return self._inner.params

    @property
    def frozen(self) -> bool:
        return True

    def copy(self):
        return self

    def backward(self, dout, cache) -> dict:
        """Frozen parameters get an all-zero gradient."""
        return {k: np.zeros_like(v) for k, v in self._inner.params.items()}

    def encode_batch(self, sentences, truncate: bool = False):
        return self._inner.encode_batch(sentences, truncate)

    def encode(self, sentence: str, truncate: bool = False) -> RepSequence:
        key = (sentence, truncate)
        rep = self._cache.get(key)
        if rep is None:
            rep = self._inner.encode(sentence, truncate)
            rep.values.flags.writeable = False
            if len(self._cache) >= self._cache_size:
                self._cache.clear()
            self._cache[key] = rep
        return rep

    def encode_many(self, sentences: Sequence[str], truncate: bool = False) -> list[RepSequence]:
        """Encode a list, batching whatever is not cached yet."""
        missing = [s for s in dict.fromkeys(sentences) if (s, truncate) not in self._cache]
        if missing:
            out, lengths = self._inner.encode_batch(missing, truncate)
            if len(self._cache) + len(missing) > self._cache_size:
                self._cache.clear()
            for i, s in enumerate(missing):
                vals = out[i, : lengths[i]].copy()
                vals.flags.writeable = False
                self._cache[(s, truncate)] = RepSequence(vals, int(lengths[i]))
        return [self._cache[(s, truncate)] for s in sentences]


def freeze(encoder) -> FrozenEncoder:
    return FrozenEncoder(encoder)


class CscModel:
    """Trainable encoder plus a per-position linear head over the vocabulary."""

    def __init__(self, encoder, head_weight=None, head_bias=None, seed: int | None = None):
        self.encoder = encoder
        V, h = len(encoder.vocab), encoder.hidden_size
        dtype = encoder.dtype
        if head_weight is None:
            rng = np.random.default_rng(encoder.config.seed + 1 if seed is None else seed)
            bound = 1.0 / np.sqrt(h)
            head_weight = rng.uniform(-bound, bound, size=(h, V))
        if head_bias is None:
            head_bias = np.zeros(V)
        self.head = {
            "weight": np.asarray(head_weight, dtype=dtype),
            "bias": np.asarray(head_bias, dtype=dtype),
        }
        if self.head["weight"].shape != (h, V) or self.head["bias"].shape != (V,):
            raise ValueError("head shape does not match encoder hidden size / vocab")

    @property
    def vocab(self) -> Vocab:
        return self.encoder.vocab

    @property
    def config(self) -> EncoderConfig:
        return self.encoder.config

    def named_parameters(self) -> dict:
        out = {"encoder." + k: v for k, v in self.encoder.params.items()}
        out.update({"head." + k: v for k, v in self.head.items()})
        return out

    def forward(self, sentences: Sequence[str]):
        ids, lengths = self.encoder.batch_ids(sentences)
        reps, cache = self.encoder.forward(ids, lengths)
        logits = reps @ self.head["weight"] + self.head["bias"]
        return reps, logits, (ids, lengths, reps, cache)

    def backward(self, dreps: np.ndarray, dlogits: np.ndarray, cache) -> dict:
        ids, lengths, reps, enc_cache = cache
        grads = {
            "head.weight": _matgrad(reps, dlogits),
            "head.bias": dlogits.sum(tuple(range(dlogits.ndim - 1))),
        }
        dreps = dreps + dlogits @ self.head["weight"].T
        for k, g in self.encoder.backward(dreps, enc_cache).items():
            grads["encoder." + k] = g
        return grads

    def probabilities(self, sentence: str) -> np.ndarray:
        _, logits, _ = self.forward([sentence])
        return _softmax(logits[0, : len(sentence)].astype(np.float64))

    def copy(self):
        return copy.deepcopy(self)


# -- checkpoints -----------------------------------------------------------


def write_array(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype="<f4")  # ascontiguousarray would promote 0-d to 1-d
    with open(path, "wb") as fh:
        fh.write(_ARRAY_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_array(path, name: str = "") -> np.ndarray:
    label = name or str(path)
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"parameter {label}: cannot read array file ({exc})") from None
    if len(raw) < 8 or raw[:4] != _ARRAY_MAGIC:
        raise CheckpointError(f"parameter {label}: not an array file")
    (ndim,) = struct.unpack_from("<I", raw, 4)
    head = 8 + 4 * ndim
    if len(raw) < head:
        raise CheckpointError(f"parameter {label}: truncated header")
    shape = struct.unpack_from(f"<{ndim}I", raw, 8)
    count = int(np.prod(shape)) if ndim else 1
    if len(raw) != head + 4 * count:
        raise CheckpointError(f"parameter {label}: payload size does not match shape {shape}")
    return np.frombuffer(raw, dtype="<f4", offset=head).reshape(shape).copy()


def _atomic_dir_write(path: Path, fill) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        fill(tmp)
        if path.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{path.name}.old.", dir=path.parent))
            os.replace(path, old / "x")
            os.replace(tmp, path)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def save_checkpoint(obj, path, step: int = 0, extra: dict | None = None) -> Path:
    """Write an encoder or :class:`CscModel` to directory ``path`` atomically."""
    if isinstance(obj, FrozenEncoder):
        obj = obj._inner
    if isinstance(obj, CscModel):
        kind, config, named = "csc_model", obj.config, obj.named_parameters()
    else:
        kind, config, named = "encoder", obj.config, dict(obj.params)
    entries = []
    for i, (name, arr) in enumerate(sorted(named.items())):
        entries.append({"name": name, "shape": list(arr.shape), "file": f"p{i:04d}.f32"})
    manifest = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": config.to_dict(),
        "seed": config.seed,
        "step": int(step),
        "parameters": entries,
    }
    if extra:
        manifest["extra"] = extra

    def fill(tmp: Path):
        for e in entries:
            write_array(tmp / e["file"], named[e["name"]])
        (tmp / MANIFEST_NAME).write_text(
            json.dumps(manifest, ensure_ascii=False, indent=1), encoding="utf-8"
        )

    _atomic_dir_write(Path(path), fill)
    return Path(path)


def read_manifest(path) -> dict:
    mpath = Path(path) / MANIFEST_NAME
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read manifest {mpath}: {exc}") from None
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {manifest.get('version')!r} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    return manifest


def _load_named(path, manifest, config: EncoderConfig, prefix: str, expected: dict) -> dict:
    listed = {e["name"]: e for e in manifest["parameters"]}
    params = {}
    for name, shape in expected.items():
        full = prefix + name
        if full not in listed:
            raise CheckpointError(f"parameter {full}: missing from manifest")
        entry = listed[full]
        arr = read_array(Path(path) / entry["file"], full)
        if tuple(arr.shape) != tuple(shape) or tuple(entry["shape"]) != tuple(shape):
            raise CheckpointError(
                f"parameter {full}: stored shape {tuple(arr.shape)} != expected {tuple(shape)}"
            )
        params[name] = arr.astype(config.dtype)
    return params


def _encoder_shapes(config: EncoderConfig) -> dict:
    if config.kind == "lookup":
        return {"tok_emb": (len(Vocab(config.vocab)), config.hidden_size)}
    probe = TransformerEncoder.__new__(TransformerEncoder)
    _EncoderBase.__init__(probe, config)
    return probe._shapes()


def _resolve_config(manifest, config) -> EncoderConfig:
    stored = EncoderConfig.from_dict(manifest["config"])
    if config is None:
        return stored
    if isinstance(config, dict):
        config = EncoderConfig.from_dict(config)
    return config


def load_checkpoint(path, config: EncoderConfig | None = None):
    """Load an encoder (a CSC model checkpoint yields its encoder).

    ``config`` overrides the stored one; any parameter that is missing,
    unreadable or shaped differently from what ``config`` implies raises
    :class:`CheckpointError` naming that parameter.
    """
    manifest = read_manifest(path)
    config = _resolve_config(manifest, config)
    prefix = "encoder." if manifest.get("kind") == "csc_model" else ""
    params = _load_named(path, manifest, config, prefix, _encoder_shapes(config))
    return build_encoder(config, params)


def load_model(path, config: EncoderConfig | None = None) -> CscModel:
    manifest = read_manifest(path)
    if manifest.get("kind") != "csc_model":
        raise CheckpointError(f"{path} holds a bare encoder, not a CSC model")
    config = _resolve_config(manifest, config)
    encoder = build_encoder(
        config, _load_named(path, manifest, config, "encoder.", _encoder_shapes(config))
    )
    V, h = len(encoder.vocab), config.hidden_size
    head = _load_named(path, manifest, config, "head.", {"weight": (h, V), "bias": (V,)})
    return CscModel(encoder, head["weight"], head["bias"])
