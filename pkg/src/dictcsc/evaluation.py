"""Greedy correction and strict sentence-level detection/correction metrics.

A sentence is a *gold positive* when its target differs from its source
and a *predicted positive* when the model changed anything.  Detection
counts a hit when the changed positions equal the gold error positions
exactly; correction additionally requires the output to equal the target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import CorpusFormatError, CscSample, diff_positions

__all__ = [
    "AUXILIARY_CHARS",
    "AlignmentError",
    "Prediction",
    "LevelScores",
    "EvalReport",
    "predict",
    "predict_many",
    "sighan13_filter",
    "evaluate",
    "load_predictions",
    "save_predictions",
    "render_report",
]

AUXILIARY_CHARS = frozenset("的地得")


class AlignmentError(ValueError):
    """Predictions and gold samples do not line up."""


@dataclass(frozen=True)
class Prediction:
    id: str
    source: str
    output: str

    def __post_init__(self):
        if len(self.output) != len(self.source):
            raise AlignmentError(f"prediction {self.id!r}: output length differs from source")


@dataclass(frozen=True)
class LevelScores:
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class EvalReport:
    detection: LevelScores
    correction: LevelScores
    gold_positive: int
    predicted_positive: int
    det_tp: int
    cor_tp: int
    sentences: int = 0

    def to_dict(self) -> dict:
        return {
            "detection": self.detection.as_dict(),
            "correction": self.correction.as_dict(),
            "counts": {
                "sentences": self.sentences,
                "gold_positive": self.gold_positive,
                "predicted_positive": self.predicted_positive,
                "det_tp": self.det_tp,
                "cor_tp": self.cor_tp,
            },
        }


def _scores(tp: int, predicted: int, gold: int) -> LevelScores:
    p = tp / predicted if predicted else 0.0
    r = tp / gold if gold else 0.0
    # 2TP / (pred + gold) is the harmonic mean of p and r without rounding drift.
    f1 = 2 * tp / (predicted + gold) if tp else 0.0
    return LevelScores(p, r, f1)


def predict(model, sentence: str, sample_id: str = "") -> Prediction:
    return predict_many(model, [sentence], [sample_id])[0]


def predict_many(model, sentences: Sequence[str], ids: Sequence[str] | None = None, batch_size: int = 64):
    """Argmax decoding of the CSC head; reserved tokens fall back to the input character."""
    ids = list(ids) if ids is not None else [str(i) for i in range(len(sentences))]
    vocab = model.vocab
    out = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start : start + batch_size]
        _, logits, _ = model.forward(chunk)
        best = np.argmax(logits, axis=-1)
        for j, sent in enumerate(chunk):
            chars = [
                vocab.char_of(int(k)) if k >= len(vocab.SPECIALS) else c
                for c, k in zip(sent, best[j, : len(sent)])
            ]
            out.append(Prediction(ids[start + j], sent, "".join(chars)))
    return out


def sighan13_filter(pred: Prediction, gold: CscSample) -> tuple[Prediction, CscSample]:
    """Neutralise every position where an auxiliary 的/地/得 appears in source, output or target."""
    src = pred.source
    out, tgt = list(pred.output), list(gold.target)
    for i, c in enumerate(src):
        if c in AUXILIARY_CHARS or out[i] in AUXILIARY_CHARS or tgt[i] in AUXILIARY_CHARS:
            out[i] = tgt[i] = c
    return Prediction(pred.id, src, "".join(out)), CscSample(gold.id, gold.source, "".join(tgt))


def _align(preds: Iterable[Prediction], gold: Iterable[CscSample]):
    by_id = {}
    for p in preds:
        if p.id in by_id:
            raise AlignmentError(f"duplicate prediction id {p.id!r}")
        by_id[p.id] = p
    pairs = []
    for g in gold:
        p = by_id.pop(g.id, None)
        if p is None:
            raise AlignmentError(f"no prediction for gold id {g.id!r}")
        if p.source != g.source:
            raise AlignmentError(f"id {g.id!r}: prediction source differs from gold source")
        pairs.append((p, g))
    if by_id:
        raise AlignmentError(f"prediction ids without gold: {sorted(by_id)[:5]}")
    return pairs


def evaluate(
    preds: Iterable[Prediction], gold: Iterable[CscSample], sighan13_mode: bool = False
) -> EvalReport:
    pairs = _align(preds, gold)
    gold_pos = pred_pos = det_tp = cor_tp = 0
    for p, g in pairs:
        if sighan13_mode:
            p, g = sighan13_filter(p, g)
        gold_changed = g.error_positions
        pred_changed = diff_positions(p.source, p.output)
        if gold_changed:
            gold_pos += 1
        if pred_changed:
            pred_pos += 1
            if pred_changed == gold_changed:
                det_tp += 1
                if p.output == g.target:
                    cor_tp += 1
    return EvalReport(
        _scores(det_tp, pred_pos, gold_pos),
        _scores(cor_tp, pred_pos, gold_pos),
        gold_pos,
        pred_pos,
        det_tp,
        cor_tp,
        len(pairs),
    )


def load_predictions(path) -> list[Prediction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusFormatError("expected id<TAB>source<TAB>output", lineno, str(path))
            out.append(Prediction(*parts))
    return out


def save_predictions(preds: Iterable[Prediction], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in preds:
            fh.write(f"{p.id}\t{p.source}\t{p.output}\n")


def render_report(report: EvalReport) -> str:
    lines = [
        f"{'level':<12}{'precision':>11}{'recall':>11}{'f1':>11}",
    ]
    for name, lv in (("detection", report.detection), ("correction", report.correction)):
        lines.append(f"{name:<12}{lv.precision:>11.4f}{lv.recall:>11.4f}{lv.f1:>11.4f}")
    lines.append(
        f"sentences={report.sentences} gold_positive={report.gold_positive} "
        f"predicted_positive={report.predicted_positive} det_tp={report.det_tp} "
        f"cor_tp={report.cor_tp}"
    )
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, path) -> None:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    path.with_suffix(".txt").write_text(render_report(report), encoding="utf-8")
