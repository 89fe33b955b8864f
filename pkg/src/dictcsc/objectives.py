"""Representation metrics, InfoNCE, CSC cross-entropy and the weighted total.

Scores enter InfoNCE as logarithms, so the dot-product metric
``exp(o_s . k_s)`` never has to be exponentiated: the loss is a
log-sum-exp over the raw dot products.  The span-cosine metric, which can
be negative, is fed through ``exp(cos / temperature)`` by default
(``mode="exp"``); ``mode="clamp"`` uses ``max(cos, eps)`` instead.

Each ``*_loss`` helper returns ``(loss, grad)`` where ``grad`` is the
gradient with respect to the trainable side only (the original-sentence
representation or the logits); positive and negative representations come
from frozen encoders and are treated as constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "DegenerateInputError",
    "MetricScores",
    "LossWeights",
    "log_metric_dot",
    "metric_dot",
    "mean_pool",
    "metric_cosine_span",
    "info_nce",
    "info_nce_grad",
    "dot_contrastive_loss",
    "cosine_contrastive_loss",
    "csc_loss",
    "csc_loss_grad",
    "combined_loss",
]


class DegenerateInputError(ValueError):
    """Cosine of a zero-norm vector."""


def _rows(rep) -> np.ndarray:
    """Valid rows of a RepSequence, or a plain 2-D array as-is."""
    if hasattr(rep, "valid_length"):
        return np.asarray(rep.values)[: rep.valid_length]
    return np.asarray(rep)


@dataclass(frozen=True)
class MetricScores:
    """Positive and negative metric values, stored as their logarithms."""

    log_positive: float
    log_negatives: tuple

    def __post_init__(self):
        negs = tuple(float(x) for x in self.log_negatives)
        object.__setattr__(self, "log_negatives", negs)
        object.__setattr__(self, "log_positive", float(self.log_positive))
        if not negs:
            raise ValueError("at least one negative score is required")
        if not np.all(np.isfinite((self.log_positive,) + negs)):
            raise ValueError("scores must be positive and finite")

    @classmethod
    def from_scores(cls, positive: float, negatives: Sequence[float]) -> "MetricScores":
        vals = np.asarray([positive, *negatives], dtype=np.float64)
        if np.any(~(vals > 0)) or np.any(~np.isfinite(vals)):
            raise ValueError("scores must be strictly positive and finite")
        logs = np.log(vals)
        return cls(logs[0], tuple(logs[1:]))

    @property
    def positive_score(self) -> float:
        return float(np.exp(self.log_positive))

    @property
    def negative_scores(self) -> list:
        return [float(np.exp(x)) for x in self.log_negatives]

    @property
    def n(self) -> int:
        return len(self.log_negatives)


@dataclass(frozen=True)
class LossWeights:
    csc: float = 1.0
    phonetic: float = 1.0
    visual: float = 1.0
    definition: float = 1.0

    def __post_init__(self):
        for name in ("csc", "phonetic", "visual", "definition"):
            v = getattr(self, name)
            if not (v >= 0 and np.isfinite(v)):
                raise ValueError(f"loss weight {name} must be a finite non-negative number")

    def as_tuple(self) -> tuple:
        return (self.csc, self.phonetic, self.visual, self.definition)


# -- metrics ---------------------------------------------------------------


def _check_index(s: int, *lengths: int) -> None:
    for n in lengths:
        if not 0 <= s < n:
            raise IndexError(f"position {s} outside valid length {n}")


def log_metric_dot(rep_o, rep_other, s: int, scale: float = 1.0) -> float:
    o, k = _rows(rep_o), _rows(rep_other)
    _check_index(s, len(o), len(k))
    if o.shape[-1] != k.shape[-1]:
        raise ValueError("hidden sizes differ")
    return float(scale * (o[s].astype(np.float64) @ k[s].astype(np.float64)))


def metric_dot(rep_o, rep_other, s: int, scale: float = 1.0) -> float:
    """``exp(o_s . k_s)``; may overflow to ``inf`` -- losses use the log form."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_metric_dot(rep_o, rep_other, s, scale)))


def mean_pool(rep, start: int = 0, width: int | None = None) -> np.ndarray:
    rows = _rows(rep)
    if width is None:
        width = len(rows) - 1 - start
    _check_index(start + width, len(rows))
    if width < 0:
        raise ValueError("empty pooling span")
    return rows[start : start + width + 1].astype(np.float64).mean(axis=0)


def _cosine(u, m):
    nu, nm = np.linalg.norm(u), np.linalg.norm(m)
    if nu == 0 or nm == 0:
        raise DegenerateInputError("cosine of a zero-norm pooled vector")
    return float(u @ m / (nu * nm)), nu, nm


def metric_cosine_span(rep_o, rep_def, s: int, w: int) -> float:
    """Cosine between the mean of ``rep_o`` rows ``s..s+w`` and the mean of all valid definition rows."""
    c, _, _ = _cosine(mean_pool(rep_o, s, w), mean_pool(rep_def))
    return float(np.clip(c, -1.0, 1.0))


# -- InfoNCE ---------------------------------------------------------------


def _logsumexp(z: np.ndarray) -> float:
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def info_nce(scores: MetricScores) -> float:
    """``-log(pos / (pos + sum(neg)))`` evaluated in log space."""
    z = np.array((scores.log_positive,) + scores.log_negatives)
    return _logsumexp(z) - z[0]


def info_nce_grad(scores: MetricScores):
    """Loss and its gradient w.r.t. the log-scores ``(d/dlog_pos, d/dlog_negs)``."""
    z = np.array((scores.log_positive,) + scores.log_negatives)
    lse = _logsumexp(z)
    p = np.exp(z - lse)
    g = p.copy()
    g[0] -= 1.0
    return lse - z[0], g[0], g[1:]


def dot_contrastive_loss(o_rep, pos_rep, neg_reps, s: int, scale: float = 1.0):
    """InfoNCE with the dot metric at position ``s``.

    Returns ``(loss, grad)`` with ``grad`` shaped like the valid rows of
    ``o_rep``; only row ``s`` is non-zero.
    """
    o = _rows(o_rep)
    keys = [_rows(pos_rep)] + [_rows(r) for r in neg_reps]
    for k in keys:
        _check_index(s, len(o), len(k))
    K = np.stack([k[s] for k in keys]).astype(np.float64)
    z = scale * (K @ o[s].astype(np.float64))
    loss, gpos, gneg = info_nce_grad(MetricScores(z[0], tuple(z[1:])))
    gz = np.concatenate(([gpos], gneg))
    grad = np.zeros(o.shape, dtype=np.float64)
    grad[s] = scale * (gz @ K)
    return loss, grad


def cosine_contrastive_loss(
    o_rep,
    pos_rep,
    neg_reps,
    s: int,
    w: int,
    mode: str = "exp",
    temperature: float = 1.0,
    eps: float = 1e-6,
):
    """InfoNCE with the span/definition cosine metric.

    ``mode="exp"`` scores are ``exp(cos / temperature)``; ``mode="clamp"``
    scores are ``max(cos, eps)`` (gradient zero where clamped).
    """
    if mode not in ("exp", "clamp"):
        raise ValueError(f"unknown cosine mode {mode!r}")
    o = _rows(o_rep)
    u = mean_pool(o, s, w)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise DegenerateInputError("cosine of a zero-norm pooled vector")
    cos, dcos_du = [], []
    for rep in [pos_rep, *neg_reps]:
        m = mean_pool(rep)
        c, _, nm = _cosine(u, m)
        cos.append(c)
        dcos_du.append(m / (nu * nm) - c * u / (nu * nu))
    cos = np.array(cos)
    if mode == "exp":
        z = cos / temperature
        dz_dc = np.full_like(cos, 1.0 / temperature)
    else:
        clamped = np.maximum(cos, eps)
        z = np.log(clamped)
        dz_dc = np.where(cos > eps, 1.0 / clamped, 0.0)
    loss, gpos, gneg = info_nce_grad(MetricScores(z[0], tuple(z[1:])))
    gc = np.concatenate(([gpos], gneg)) * dz_dc
    du = gc @ np.stack(dcos_du)
    grad = np.zeros(o.shape, dtype=np.float64)
    grad[s : s + w + 1] = du / (w + 1)
    return loss, grad


# -- CSC objective ---------------------------------------------------------


def csc_loss_grad(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray | None = None):
    """Mean token cross-entropy over masked positions, and d/dlogits.

    ``logits`` is ``(..., V)``; ``targets`` and ``mask`` match its leading
    shape.  An empty mask gives loss 0 and a zero gradient.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    if mask is None:
        mask = np.ones(targets.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    grad = np.zeros_like(logits)
    if count == 0:
        return 0.0, grad
    shifted = logits - logits.max(-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(-1, keepdims=True))
    logp = shifted - logz
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    loss = float(-(picked * mask).sum() / count)
    probs = np.exp(logp)
    np.put_along_axis(
        probs, targets[..., None], np.take_along_axis(probs, targets[..., None], -1) - 1.0, -1
    )
    grad = probs * (mask[..., None] / count)
    return loss, grad


def csc_loss(logits, targets, mask=None) -> float:
    return csc_loss_grad(logits, targets, mask)[0]


def combined_loss(l_csc: float, l_p: float, l_v: float, l_d: float, weights: LossWeights) -> float:
    """``w_csc*l_csc + w_p*l_p + w_v*l_v + w_d*l_d``; pass 0 for a skipped objective."""
    parts = (l_csc, l_p, l_v, l_d)
    return float(sum(w * l for w, l in zip(weights.as_tuple(), parts) if w != 0))
