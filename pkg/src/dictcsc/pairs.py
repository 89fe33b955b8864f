"""Positive/negative mini-batch construction for the contrastive objectives.

Every builder takes one CSC sample and one error position and returns a
:class:`ContrastiveBatch`: the erroneous source sentence, one positive and
``n`` negatives.  Builders raise :class:`SkipBatch` when the knowledge base
has nothing to offer for that position and :class:`InsufficientCandidates`
when it cannot supply ``n`` distinct negatives.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .data import CscSample
from .knowledge import (
    KnowledgeBase,
    phonetically_disjoint,
    phonetically_similar,
    select_definition,
    span_containing,
)

__all__ = [
    "KnowledgeKind",
    "ContrastiveBatch",
    "SkipBatch",
    "InsufficientCandidates",
    "build_phonetic_batch",
    "build_visual_batch",
    "build_definition_batch",
    "build_batch",
    "iter_error_positions",
    "write_batches",
    "read_batches",
]


class KnowledgeKind(str, enum.Enum):
    P = "P"
    V = "V"
    D = "D"


class SkipBatch(Exception):
    """No positive can be built for this position; drop the objective here."""


class InsufficientCandidates(RuntimeError):
    """The candidate pool is smaller than the requested number of negatives."""


@dataclass(frozen=True)
class ContrastiveBatch:
    kind: KnowledgeKind
    original: str
    positive: str
    negatives: tuple[str, ...]
    error_index: int
    span_width: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", KnowledgeKind(self.kind))
        object.__setattr__(self, "negatives", tuple(self.negatives))
        if not self.negatives:
            raise ValueError("a contrastive batch needs at least one negative")
        if not 0 <= self.error_index <= self.error_index + self.span_width < len(self.original):
            raise ValueError(
                f"span {self.error_index}..{self.error_index + self.span_width} "
                f"outside sentence of length {len(self.original)}"
            )

    @property
    def n(self) -> int:
        return len(self.negatives)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "original": self.original,
            "positive": self.positive,
            "negatives": list(self.negatives),
            "error_index": self.error_index,
            "span_width": self.span_width,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "ContrastiveBatch":
        return cls(
            KnowledgeKind(rec["kind"]),
            rec["original"],
            rec["positive"],
            tuple(rec["negatives"]),
            int(rec["error_index"]),
            int(rec.get("span_width", 0)),
        )


def _check_request(sample: CscSample, s: int, n: int) -> None:
    if n < 1:
        raise ValueError(f"number of negatives must be >= 1, got {n}")
    if s not in sample.error_positions:
        raise ValueError(f"position {s} is not an error position of sample {sample.id!r}")


def _substitute(sentence: str, s: int, char: str) -> str:
    return sentence[:s] + char + sentence[s + 1 :]


def _substitution_batch(kind, sample, s, n, positives, negatives, rng) -> ContrastiveBatch:
    if not positives:
        raise SkipBatch(f"{kind.value}: no candidate positive for {sample.source[s]!r}")
    if len(negatives) < n:
        raise InsufficientCandidates(
            f"{kind.value}: need {n} negatives for {sample.source[s]!r}, "
            f"only {len(negatives)} available"
        )
    original = sample.source
    pos_char = positives[int(rng.integers(len(positives)))]
    neg_chars = rng.choice(len(negatives), size=n, replace=False)
    return ContrastiveBatch(
        kind,
        original,
        _substitute(original, s, pos_char),
        tuple(_substitute(original, s, negatives[i]) for i in neg_chars),
        s,
        0,
    )


def build_phonetic_batch(
    sample: CscSample,
    s: int,
    n: int,
    kb: KnowledgeBase,
    vocab: Iterable[str],
    rng: np.random.Generator,
) -> ContrastiveBatch:
    """Positive: a same-syllable character at ``s``; negatives: disjoint-pinyin ones."""
    _check_request(sample, s, n)
    err = sample.source[s]
    pool = sorted(set(vocab))
    positives = [c for c in pool if phonetically_similar(err, c, kb.pinyin)]
    negatives = [c for c in pool if c != err and phonetically_disjoint(err, c, kb.pinyin)]
    return _substitution_batch(KnowledgeKind.P, sample, s, n, positives, negatives, rng)


def build_visual_batch(
    sample: CscSample,
    s: int,
    n: int,
    kb: KnowledgeBase,
    vocab: Iterable[str],
    rng: np.random.Generator,
) -> ContrastiveBatch:
    """Positive: a confusion-set neighbour of the error character; negatives: the rest."""
    _check_request(sample, s, n)
    err = sample.source[s]
    similar = kb.visual.get(err)
    pool = sorted(set(vocab))
    positives = sorted(similar)
    negatives = [c for c in pool if c != err and c not in similar]
    return _substitution_batch(KnowledgeKind.V, sample, s, n, positives, negatives, rng)


def build_definition_batch(
    sample: CscSample,
    s: int,
    n: int,
    kb: KnowledgeBase,
    strategy: str,
    rng: np.random.Generator,
    sim_encoder=None,
) -> ContrastiveBatch:
    """Positive: a definition of the gold word covering ``s``.

    The gold sentence is segmented; if the word covering ``s`` has no entry,
    the gold character alone is tried before giving up.  The batch's
    ``error_index``/``span_width`` locate that word in the source sentence.
    Negatives are definitions of other, randomly drawn headwords.
    """
    _check_request(sample, s, n)
    dictionary = kb.dictionary
    if len(dictionary) < n + 1:
        raise InsufficientCandidates(
            f"D: dictionary has {len(dictionary)} words, need at least {n + 1}"
        )
    context = sample.target
    span = span_containing(kb.tokenizer.segment(context), s)
    word, start, width = span.word, span.start, span.width
    if word not in dictionary:
        word, start, width = context[s], s, 0
        if word not in dictionary:
            raise SkipBatch(f"D: neither {span.word!r} nor {word!r} is in the dictionary")

    def pick(w):
        return select_definition(w, context, dictionary, strategy, sim_encoder, rng)

    positive = pick(word)
    others = [w for w in dictionary.words() if w != word]
    chosen: list[str] = []
    for idx in rng.permutation(len(others)):
        d = pick(others[idx])
        if d != positive and d not in chosen:
            chosen.append(d)
            if len(chosen) == n:
                break
    if len(chosen) < n:
        raise InsufficientCandidates(
            f"D: only {len(chosen)} distinct negative definitions for {word!r}"
        )
    return ContrastiveBatch(KnowledgeKind.D, sample.source, positive, tuple(chosen), start, width)


def build_batch(kind, sample, s, n, kb, vocab, rng, strategy="first", sim_encoder=None):
    kind = KnowledgeKind(kind)
    if kind is KnowledgeKind.P:
        return build_phonetic_batch(sample, s, n, kb, vocab, rng)
    if kind is KnowledgeKind.V:
        return build_visual_batch(sample, s, n, kb, vocab, rng)
    return build_definition_batch(sample, s, n, kb, strategy, rng, sim_encoder)


def iter_error_positions(samples: Iterable[CscSample], cap: int = 0) -> Iterator[tuple[CscSample, int]]:
    """(sample, position) pairs, at most ``cap`` per sample (0 = all)."""
    for sample in samples:
        positions = sample.error_positions
        if cap > 0:
            positions = positions[:cap]
        for s in positions:
            yield sample, s


def write_batches(batches: Iterable[ContrastiveBatch], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for b in batches:
            fh.write(json.dumps(b.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_batches(path) -> list[ContrastiveBatch]:
    out = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(ContrastiveBatch.from_dict(json.loads(line)))
    return out
