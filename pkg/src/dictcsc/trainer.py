"""Training loop for the CSC model with the three contrastive objectives.

One optimizer step consumes a batch of CSC samples.  The erroneous source
sentences are encoded once by the trainable encoder; the cross-entropy
head and every contrastive mini-batch built from those sentences add their
gradients to the same representations, which are then backpropagated in a
single pass.  Knowledge encoders are :class:`~dictcsc.encoders.FrozenEncoder`
snapshots and never receive updates.
"""

from __future__ import annotations

import configparser
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import CscSample
from .encoders import (
    CscModel,
    EncoderConfig,
    FrozenEncoder,
    TransformerEncoder,
    Vocab,
    decays,
    freeze,
    load_checkpoint,
    save_checkpoint,
)
from .knowledge import DEFINITION_STRATEGIES, KnowledgeBase
from .objectives import (
    LossWeights,
    combined_loss,
    cosine_contrastive_loss,
    csc_loss_grad,
    dot_contrastive_loss,
)
from .pairs import (
    ContrastiveBatch,
    KnowledgeKind,
    SkipBatch,
    build_batch,
    iter_error_positions,
)

__all__ = [
    "ConfigError",
    "TrainingError",
    "TrainConfig",
    "ModelSettings",
    "KnowledgeEncoders",
    "StepLosses",
    "TrainResult",
    "AdamW",
    "lr_schedule",
    "resolve_warmup",
    "build_vocab",
    "build_model",
    "default_knowledge_encoders",
    "gather_contrastive_batches",
    "loss_and_gradients",
    "training_step",
    "train",
    "pretrain_copy",
    "clip_gradients",
    "parse_config",
    "load_config_file",
    "config_to_dict",
    "with_weights",
]

log = logging.getLogger(__name__)

KINDS = (KnowledgeKind.P, KnowledgeKind.V, KnowledgeKind.D)


class ConfigError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    negatives: int = 8
    learning_rate: float = 5e-5
    warmup_steps: int = -1  # -1: 5% of total steps
    max_length: int = 128
    weights: LossWeights = field(default_factory=LossWeights)
    definition_strategy: str = "similar"
    seed: int = 0
    per_sample_error_cap: int = 0  # 0: every error position
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    contrastive_interval: int = 1
    csc_positions: str = "all"
    cosine_mode: str = "exp"
    cosine_temperature: float = 1.0
    dot_scale: float = 1.0

    def __post_init__(self):
        if isinstance(self.weights, (tuple, list)):
            self.weights = LossWeights(*self.weights)
        checks = [
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.negatives >= 1, "negatives must be >= 1"),
            (self.learning_rate > 0, "learning_rate must be > 0"),
            (self.warmup_steps >= -1, "warmup_steps must be >= 0 (or -1 for 5%)"),
            (self.max_length >= 1, "max_length must be >= 1"),
            (self.per_sample_error_cap >= 0, "per_sample_error_cap must be >= 0"),
            (self.contrastive_interval >= 1, "contrastive_interval must be >= 1"),
            (self.definition_strategy in DEFINITION_STRATEGIES, "unknown definition_strategy"),
            (self.csc_positions in ("all", "errors"), "csc_positions must be 'all' or 'errors'"),
            (self.cosine_mode in ("exp", "clamp"), "cosine_mode must be 'exp' or 'clamp'"),
            (self.cosine_temperature > 0, "cosine_temperature must be > 0"),
            (self.clip_norm >= 0, "clip_norm must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


@dataclass
class ModelSettings:
    hidden_size: int = 64
    layers: int = 2
    heads: int = 2
    ffn_size: int = 0
    init_checkpoint: str | None = None
    phonetic_checkpoint: str | None = None
    visual_checkpoint: str | None = None
    definition_checkpoint: str | None = None


@dataclass
class KnowledgeEncoders:
    phonetic: FrozenEncoder
    visual: FrozenEncoder
    definition: FrozenEncoder

    def for_kind(self, kind: KnowledgeKind) -> FrozenEncoder:
        return {
            KnowledgeKind.P: self.phonetic,
            KnowledgeKind.V: self.visual,
            KnowledgeKind.D: self.definition,
        }[KnowledgeKind(kind)]

    def all(self):
        return (self.phonetic, self.visual, self.definition)


@dataclass(frozen=True)
class StepLosses:
    l_csc: float
    l_p: float
    l_v: float
    l_d: float
    total: float

    def as_dict(self) -> dict:
        return {
            "l_csc": self.l_csc,
            "l_p": self.l_p,
            "l_v": self.l_v,
            "l_d": self.l_d,
            "total": self.total,
        }


@dataclass
class TrainResult:
    model: CscModel
    log: list
    checkpoints: list
    encoders: KnowledgeEncoders
    total_steps: int


# -- optimisation ----------------------------------------------------------


class AdamW:
    """Adam with decoupled weight decay (biases and LayerNorm excluded)."""

    def __init__(self, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01, decay_filter=decays):
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decay_filter = decay_filter
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], lr: float):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for name, p in params.items():
            g = grads[name].astype(np.float64)
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros(p.shape)
                self.v[name] = np.zeros(p.shape)
            v = self.v[name]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            new = p.astype(np.float64)
            if self.weight_decay and self.decay_filter(name):
                new -= lr * self.weight_decay * new
            new -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p[...] = new.astype(p.dtype)


def clip_gradients(grads: dict, max_norm: float) -> float:
    norm = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


def resolve_warmup(config: TrainConfig, total_steps: int) -> int:
    if config.warmup_steps >= 0:
        return config.warmup_steps
    return int(round(0.05 * total_steps))


def lr_schedule(step: int, total_steps: int, config: TrainConfig, warmup: int | None = None) -> float:
    """Linear warm-up from 0 to the peak, then linear decay to 0 at ``total_steps``."""
    if warmup is None:
        warmup = resolve_warmup(config, total_steps)
    if total_steps <= warmup:
        raise ConfigError(f"total_steps ({total_steps}) must exceed warmup_steps ({warmup})")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    peak = config.learning_rate
    if step < warmup:
        return peak * step / warmup
    return peak * (total_steps - step) / (total_steps - warmup)


# -- set-up helpers --------------------------------------------------------


def build_vocab(samples: Sequence[CscSample], kb: KnowledgeBase | None = None) -> Vocab:
    texts = [s.source for s in samples] + [s.target for s in samples]
    return Vocab.from_texts(texts, kb.characters() if kb is not None else ())


def build_model(vocab: Vocab, settings: ModelSettings, config: TrainConfig) -> CscModel:
    if settings.init_checkpoint:
        encoder = load_checkpoint(settings.init_checkpoint)
        if encoder.vocab.itos != vocab.itos:
            log.info("init checkpoint brings its own vocabulary (%d entries)", len(encoder.vocab))
    else:
        encoder = TransformerEncoder(
            EncoderConfig(
                vocab=vocab.chars,
                hidden_size=settings.hidden_size,
                layers=settings.layers,
                heads=settings.heads,
                ffn_size=settings.ffn_size,
                max_length=config.max_length,
                seed=config.seed,
            )
        )
    return CscModel(encoder)


def default_knowledge_encoders(encoder, settings: ModelSettings | None = None) -> KnowledgeEncoders:
    """Frozen copies of ``encoder`` unless a checkpoint is configured for a kind."""
    settings = settings or ModelSettings()

    def pick(path):
        return freeze(load_checkpoint(path) if path else encoder)

    return KnowledgeEncoders(
        pick(settings.phonetic_checkpoint),
        pick(settings.visual_checkpoint),
        pick(settings.definition_checkpoint),
    )


def _check_compatible(model: CscModel, encoders: KnowledgeEncoders) -> None:
    for name, enc in zip(("phonetic", "visual", "definition"), encoders.all()):
        if not isinstance(enc, FrozenEncoder):
            raise ConfigError(f"{name} knowledge encoder must be frozen")
        if enc.hidden_size != model.encoder.hidden_size:
            raise ConfigError(
                f"{name} encoder hidden size {enc.hidden_size} != CSC encoder "
                f"{model.encoder.hidden_size}"
            )
        if enc.vocab.itos != model.vocab.itos:
            raise ConfigError(f"{name} encoder vocabulary differs from the CSC encoder's")


def _weight_of(weights: LossWeights, kind: KnowledgeKind) -> float:
    return {
        KnowledgeKind.P: weights.phonetic,
        KnowledgeKind.V: weights.visual,
        KnowledgeKind.D: weights.definition,
    }[kind]


def gather_contrastive_batches(
    samples: Sequence[CscSample],
    config: TrainConfig,
    kb: KnowledgeBase,
    vocab_chars: Sequence[str],
    encoders: KnowledgeEncoders,
    rng: np.random.Generator,
    offline: Mapping | None = None,
) -> dict:
    """Up to ``batch_size`` mini-batches per active kind for one CSC batch.

    With ``offline`` (kind -> original sentence -> list of batches), stored
    batches are used instead of building new ones.
    """
    out = {}
    candidates = list(iter_error_positions(samples, config.per_sample_error_cap))
    for kind in KINDS:
        if _weight_of(config.weights, kind) == 0:
            continue
        batches = []
        if offline is not None:
            stored = offline.get(kind, {})
            for sample in samples:
                found = stored.get(sample.source, [])
                if config.per_sample_error_cap:
                    found = found[: config.per_sample_error_cap]
                batches.extend(found)
            if len(batches) > config.batch_size:
                keep = sorted(rng.choice(len(batches), config.batch_size, replace=False))
                batches = [batches[i] for i in keep]
        else:
            chosen = candidates
            if len(chosen) > config.batch_size:
                keep = sorted(rng.choice(len(chosen), config.batch_size, replace=False))
                chosen = [chosen[i] for i in keep]
            for sample, s in chosen:
                try:
                    batches.append(
                        build_batch(
                            kind,
                            sample,
                            s,
                            config.negatives,
                            kb,
                            vocab_chars,
                            rng,
                            strategy=config.definition_strategy,
                            sim_encoder=encoders.definition,
                        )
                    )
                except SkipBatch:
                    continue
        if batches:
            out[kind] = batches
    return out


# -- the step --------------------------------------------------------------


def _contrastive_kind_loss(kind, batches, reps, rows, encoder, config):
    """Mean loss over ``batches`` and per-row gradients for ``reps``."""
    grad = np.zeros(reps.shape, dtype=np.float64)
    total = 0.0
    for b in batches:
        i = rows[b.original]
        o = reps[i, : len(b.original)]
        keys = encoder.encode_many([b.positive, *b.negatives], truncate=True)
        if kind is KnowledgeKind.D:
            loss, g = cosine_contrastive_loss(
                o,
                keys[0],
                keys[1:],
                b.error_index,
                b.span_width,
                mode=config.cosine_mode,
                temperature=config.cosine_temperature,
            )
        else:
            loss, g = dot_contrastive_loss(o, keys[0], keys[1:], b.error_index, config.dot_scale)
        total += loss
        grad[i, : len(b.original)] += g
    n = len(batches)
    return total / n, grad / n


def loss_and_gradients(
    model: CscModel,
    samples: Sequence[CscSample],
    contrastive: Mapping[KnowledgeKind, Sequence[ContrastiveBatch]],
    config: TrainConfig,
    encoders: KnowledgeEncoders,
) -> tuple[StepLosses, dict]:
    """Weighted total loss of one step and its gradient for every model parameter.

    All sentences (CSC sources and contrastive originals, deduplicated) go
    through a single forward pass; frozen encoders only supply constants.
    """
    weights = config.weights
    sentences = [s.source for s in samples]
    rows = {}
    for i, text in enumerate(sentences):
        rows.setdefault(text, i)
    for kind, batches in contrastive.items():
        for b in batches:
            if b.original not in rows:
                rows[b.original] = len(sentences)
                sentences.append(b.original)

    reps, logits, cache = model.forward(sentences)
    B, T = reps.shape[:2]
    targets = np.zeros((B, T), dtype=np.int64)
    mask = np.zeros((B, T), dtype=bool)
    for i, s in enumerate(samples):
        targets[i, : len(s.target)] = model.vocab.ids(s.target)
        if config.csc_positions == "all":
            mask[i, : len(s.target)] = True
        else:
            mask[i, list(s.error_positions)] = True

    l_csc = 0.0
    dlogits = np.zeros(logits.shape, dtype=np.float64)
    if weights.csc:
        l_csc, dlogits = csc_loss_grad(logits, targets, mask)
        dlogits *= weights.csc

    dreps = np.zeros(reps.shape, dtype=np.float64)
    parts = {}
    for kind in KINDS:
        weight = _weight_of(weights, kind)
        batches = contrastive.get(kind) or ()
        if weight == 0 or not batches:
            parts[kind] = 0.0
            continue
        loss, g = _contrastive_kind_loss(kind, batches, reps, rows, encoders.for_kind(kind), config)
        parts[kind] = loss
        dreps += weight * g

    l_p, l_v, l_d = (float(parts[k]) for k in KINDS)
    losses = StepLosses(float(l_csc), l_p, l_v, l_d, combined_loss(l_csc, l_p, l_v, l_d, weights))
    for name, value in losses.as_dict().items():
        if not np.isfinite(value):
            raise TrainingError(f"non-finite {name} ({value})")

    dtype = reps.dtype
    grads = model.backward(dreps.astype(dtype), dlogits.astype(dtype), cache)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name}")
    return losses, grads


def training_step(
    model: CscModel,
    samples: Sequence[CscSample],
    contrastive: Mapping[KnowledgeKind, Sequence[ContrastiveBatch]],
    optimizer: AdamW,
    config: TrainConfig,
    encoders: KnowledgeEncoders,
    lr: float,
) -> StepLosses:
    """One combined-loss update of the CSC encoder and head.

    With every loss weight at zero nothing is optimised and the model is
    left untouched.
    """
    if not any(config.weights.as_tuple()):
        return StepLosses(0.0, 0.0, 0.0, 0.0, 0.0)
    losses, grads = loss_and_gradients(model, samples, contrastive, config, encoders)
    clip_gradients(grads, config.clip_norm)
    optimizer.step(model.named_parameters(), grads, lr)
    return losses


# -- the loop --------------------------------------------------------------


def _index_offline(batches: Mapping) -> dict:
    out = {}
    for kind, items in batches.items():
        table = {}
        for b in items:
            table.setdefault(b.original, []).append(b)
        out[KnowledgeKind(kind)] = table
    return out


def train(
    config: TrainConfig,
    samples: Sequence[CscSample],
    kb: KnowledgeBase,
    model: CscModel | None = None,
    encoders: KnowledgeEncoders | None = None,
    *,
    settings: ModelSettings | None = None,
    out_dir=None,
    offline_batches: Mapping | None = None,
    on_step: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Run ``config.epochs`` epochs of :func:`training_step`.

    When ``out_dir`` is given, a checkpoint ``epoch-XXX`` is written after
    every epoch and each step is appended to ``train_log.jsonl``.
    ``offline_batches`` maps a kind to precomputed batches (see
    :func:`dictcsc.pairs.read_batches`).
    """
    samples = list(samples)
    if not samples:
        raise ConfigError("empty training set")
    settings = settings or ModelSettings()
    if model is None:
        model = build_model(build_vocab(samples, kb), settings, config)
    if encoders is None:
        encoders = default_knowledge_encoders(model.encoder, settings)
    _check_compatible(model, encoders)

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    order_rng = np.random.default_rng(seeds[0])
    pair_rng = np.random.default_rng(seeds[1])
    steps_per_epoch = math.ceil(len(samples) / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    warmup = resolve_warmup(config, total_steps)
    if total_steps <= warmup:
        raise ConfigError(f"total_steps ({total_steps}) must exceed warmup_steps ({warmup})")
    offline = _index_offline(offline_batches) if offline_batches is not None else None
    vocab_chars = sorted(model.vocab.chars)
    optimizer = AdamW(config.betas, config.adam_eps, config.weight_decay)

    log_fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_fh = open(out_dir / "train_log.jsonl", "w", encoding="utf-8")

    records, checkpoints = [], []
    step = 0
    try:
        for epoch in range(config.epochs):
            order = order_rng.permutation(len(samples))
            for b in range(steps_per_epoch):
                batch = [samples[i] for i in order[b * config.batch_size : (b + 1) * config.batch_size]]
                lr = lr_schedule(step, total_steps, config, warmup)
                contrastive = {}
                if step % config.contrastive_interval == 0:
                    contrastive = gather_contrastive_batches(
                        batch, config, kb, vocab_chars, encoders, pair_rng, offline
                    )
                losses = training_step(model, batch, contrastive, optimizer, config, encoders, lr)
                step += 1
                rec = {"step": step, "epoch": epoch + 1, "lr": lr, **losses.as_dict()}
                records.append(rec)
                if log_fh is not None:
                    log_fh.write(json.dumps(rec) + "\n")
                if on_step is not None:
                    on_step(rec)
            log.info("epoch %d done: last total loss %.4f", epoch + 1, records[-1]["total"])
            if out_dir is not None:
                checkpoints.append(
                    save_checkpoint(model, out_dir / f"epoch-{epoch + 1:03d}", step)
                )
    finally:
        if log_fh is not None:
            log_fh.close()
    return TrainResult(model, records, checkpoints, encoders, total_steps)


def pretrain_copy(
    texts: Sequence[str],
    kb: KnowledgeBase,
    config: TrainConfig,
    settings: ModelSettings | None = None,
    vocab_samples: Sequence[CscSample] = (),
) -> CscModel:
    """Warm up a fresh model on the identity mapping over ``texts``.

    A stand-in for a pre-trained encoder: afterwards every character's
    representation decodes to itself, so frozen copies used as knowledge
    encoders produce features the CSC head can read.  Only the CSC
    objective is used.
    """
    texts = list(texts)
    samples = [CscSample(f"copy{i}", t, t) for i, t in enumerate(texts)]
    settings = settings or ModelSettings()
    model = build_model(build_vocab([*vocab_samples, *samples], kb), settings, config)
    warm = replace(config, weights=LossWeights(1.0, 0.0, 0.0, 0.0))
    return train(warm, samples, kb, model=model, settings=settings).model


# -- config files ----------------------------------------------------------

_SECTIONS = {
    "train": {
        "epochs": int,
        "batch_size": int,
        "negatives": int,
        "learning_rate": float,
        "warmup_steps": int,
        "max_length": int,
        "seed": int,
        "per_sample_error_cap": int,
        "definition_strategy": str,
        "weight_decay": float,
        "clip_norm": float,
        "contrastive_interval": int,
        "adam_eps": float,
        "beta1": float,
        "beta2": float,
    },
    "objectives": {
        "lambda_csc": float,
        "lambda_p": float,
        "lambda_v": float,
        "lambda_d": float,
        "csc_positions": str,
        "cosine_mode": str,
        "cosine_temperature": float,
        "dot_scale": float,
    },
    "model": {
        "hidden_size": int,
        "layers": int,
        "heads": int,
        "ffn_size": int,
        "init_checkpoint": str,
    },
    "encoders": {
        "phonetic_checkpoint": str,
        "visual_checkpoint": str,
        "definition_checkpoint": str,
    },
}


def parse_config(text: str, base_dir=None) -> tuple[TrainConfig, ModelSettings]:
    """Parse ``key = value`` sections ``[train]``, ``[objectives]``, ``[model]``, ``[encoders]``.

    Unknown sections or keys raise :class:`ConfigError` naming them.
    Relative checkpoint paths resolve against ``base_dir``.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    values: dict = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown config key '{key}' in [{section}]")
            try:
                values[key] = _SECTIONS[section][key](raw.strip())
            except ValueError:
                raise ConfigError(f"bad value for '{key}': {raw!r}") from None

    defaults = TrainConfig()
    weights = LossWeights(
        values.pop("lambda_csc", defaults.weights.csc),
        values.pop("lambda_p", defaults.weights.phonetic),
        values.pop("lambda_v", defaults.weights.visual),
        values.pop("lambda_d", defaults.weights.definition),
    )
    betas = (values.pop("beta1", defaults.betas[0]), values.pop("beta2", defaults.betas[1]))
    model_keys = {f.name for f in fields(ModelSettings)}
    model_vals = {k: values.pop(k) for k in list(values) if k in model_keys}
    for key in ("init_checkpoint", "phonetic_checkpoint", "visual_checkpoint", "definition_checkpoint"):
        if model_vals.get(key) and base_dir is not None:
            model_vals[key] = str(Path(base_dir, model_vals[key]))
    config = TrainConfig(weights=weights, betas=betas, **values)
    return config, ModelSettings(**model_vals)


def load_config_file(path) -> tuple[TrainConfig, ModelSettings]:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def config_to_dict(config: TrainConfig, settings: ModelSettings | None = None) -> dict:
    d = {f.name: getattr(config, f.name) for f in fields(config)}
    d["weights"] = list(config.weights.as_tuple())
    d["betas"] = list(config.betas)
    if settings is not None:
        d["model"] = {f.name: getattr(settings, f.name) for f in fields(settings)}
    return d


def with_weights(config: TrainConfig, *weights: float) -> TrainConfig:
    return replace(config, weights=LossWeights(*weights))
