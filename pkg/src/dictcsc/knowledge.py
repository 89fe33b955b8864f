"""Read-only lookups over the three dictionary knowledge sources.

* :class:`PinyinTable` -- character readings, used for phonetic similarity.
* :class:`VisualConfusionSet` -- stroke-similar characters.
* :class:`Dictionary` -- words with ordered definition sentences.

Plus forward-maximum-matching segmentation and the three definition
selection strategies (``random``, ``first``, ``similar``).
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, NamedTuple, Protocol, Sequence

import numpy as np

from .data import CorpusFormatError

__all__ = [
    "Syllable",
    "PinyinTable",
    "VisualConfusionSet",
    "Dictionary",
    "WordSpan",
    "KnowledgeBase",
    "LookupMiss",
    "Tokenizer",
    "MaxMatchTokenizer",
    "DEFINITION_STRATEGIES",
    "parse_syllable",
    "load_pinyin_table",
    "load_confusion_set",
    "load_dictionary",
    "load_knowledge_base",
    "pinyin_of",
    "phonetically_similar",
    "phonetically_disjoint",
    "visually_similar",
    "tokenize",
    "span_containing",
    "select_definition",
]

DEFINITION_STRATEGIES = ("random", "first", "similar")

PINYIN_FILE = "pinyin.tsv"
CONFUSION_FILE = "visual_confusion.tsv"
DICTIONARY_FILE = "dictionary.jsonl"


class LookupMiss(KeyError):
    """A word is not a dictionary entry."""


class Syllable(NamedTuple):
    base: str
    tone: int

    def __str__(self):
        return f"{self.base}{self.tone}"


_SYLLABLE_RE = re.compile(r"^([a-zü:]+)([0-5])$")


def parse_syllable(text: str) -> Syllable:
    """Parse ``qi3`` style pinyin; a trailing ``5`` is read as neutral tone 0."""
    m = _SYLLABLE_RE.match(text.strip().lower())
    if not m:
        raise ValueError(f"bad pinyin syllable {text!r}")
    base = m.group(1).replace("u:", "ü").replace("v", "ü")
    tone = int(m.group(2))
    return Syllable(base, 0 if tone == 5 else tone)


class PinyinTable:
    def __init__(self, readings: Mapping[str, Sequence[Syllable]]):
        table = {}
        for char, sylls in readings.items():
            sylls = frozenset(Syllable(s.base, int(s.tone)) for s in sylls)
            if not sylls:
                raise ValueError(f"{char!r} has no readings")
            for s in sylls:
                if not s.base or s.tone not in range(5):
                    raise ValueError(f"invalid syllable {s!r} for {char!r}")
            table[char] = sylls
        self.readings = MappingProxyType(table)

    def __contains__(self, char):
        return char in self.readings

    def __len__(self):
        return len(self.readings)

    def get(self, char: str) -> frozenset:
        return self.readings.get(char, frozenset())

    def bases(self, char: str) -> frozenset:
        return frozenset(s.base for s in self.get(char))


class VisualConfusionSet:
    def __init__(self, similar: Mapping[str, Sequence[str] | str]):
        table = {}
        for char, chars in similar.items():
            table[char] = frozenset(c for c in chars if c != char)
        self.similar = MappingProxyType(table)

    def __contains__(self, char):
        return char in self.similar

    def __len__(self):
        return len(self.similar)

    def get(self, char: str) -> frozenset:
        return self.similar.get(char, frozenset())


class Dictionary:
    def __init__(self, entries: Mapping[str, Sequence[str]]):
        table = {}
        for word, defs in entries.items():
            if not word:
                raise ValueError("empty dictionary headword")
            defs = tuple(defs)
            if not defs or not all(defs):
                raise ValueError(f"entry {word!r} needs non-empty definitions")
            table[word] = defs
        self.entries = MappingProxyType(table)
        self.max_word_length = max((len(w) for w in table), default=0)

    def __contains__(self, word):
        return word in self.entries

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, word) -> tuple[str, ...]:
        try:
            return self.entries[word]
        except KeyError:
            raise LookupMiss(word) from None

    def words(self) -> list[str]:
        return sorted(self.entries)


@dataclass(frozen=True)
class WordSpan:
    """Word covering positions ``start .. start + width`` (inclusive)."""

    start: int
    width: int
    word: str

    @property
    def end(self) -> int:
        return self.start + self.width

    def __contains__(self, pos: int) -> bool:
        return self.start <= pos <= self.end


class Tokenizer(Protocol):
    def segment(self, sentence: str) -> list[WordSpan]: ...


class MaxMatchTokenizer:
    """Forward maximum matching against a word list.

    Characters that start no known word become single-character spans.
    """

    def __init__(self, words, max_word_length: int | None = None):
        self.words = frozenset(words)
        self.max_word_length = max_word_length or max((len(w) for w in self.words), default=1)

    def segment(self, sentence: str) -> list[WordSpan]:
        spans = []
        i = 0
        n = len(sentence)
        while i < n:
            size = 1
            for k in range(min(self.max_word_length, n - i), 1, -1):
                if sentence[i : i + k] in self.words:
                    size = k
                    break
            spans.append(WordSpan(i, size - 1, sentence[i : i + size]))
            i += size
        return spans


@dataclass(frozen=True)
class KnowledgeBase:
    pinyin: PinyinTable
    visual: VisualConfusionSet
    dictionary: Dictionary
    tokenizer: Tokenizer = field(default=None, compare=False)

    def __post_init__(self):
        if self.tokenizer is None:
            object.__setattr__(
                self,
                "tokenizer",
                MaxMatchTokenizer(self.dictionary.entries, self.dictionary.max_word_length),
            )

    def characters(self) -> set[str]:
        """Every character mentioned anywhere in the knowledge base."""
        chars = set(self.pinyin.readings)
        for c, sim in self.visual.similar.items():
            chars.add(c)
            chars.update(sim)
        for word, defs in self.dictionary.entries.items():
            chars.update(word)
            for d in defs:
                chars.update(d)
        return chars


# -- loading ---------------------------------------------------------------


def _table_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line.strip() and not line.startswith("#"):
                yield lineno, line


def load_pinyin_table(path) -> PinyinTable:
    readings: dict[str, set] = {}
    for lineno, line in _table_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or len(parts[0]) != 1:
            raise CorpusFormatError("expected 'char<TAB>syllables'", lineno, str(path))
        try:
            sylls = [parse_syllable(s) for s in parts[1].split(",") if s.strip()]
        except ValueError as exc:
            raise CorpusFormatError(str(exc), lineno, str(path)) from None
        if not sylls:
            raise CorpusFormatError("no syllables", lineno, str(path))
        readings.setdefault(parts[0], set()).update(sylls)
    return PinyinTable(readings)


def load_confusion_set(path) -> VisualConfusionSet:
    similar: dict[str, set] = {}
    for lineno, line in _table_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or len(parts[0]) != 1:
            raise CorpusFormatError("expected 'char<TAB>similar-chars'", lineno, str(path))
        similar.setdefault(parts[0], set()).update(parts[1].strip())
    return VisualConfusionSet(similar)


def load_dictionary(path) -> Dictionary:
    entries: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                word, defs = rec["word"], rec["definitions"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise CorpusFormatError(
                    "expected {\"word\": ..., \"definitions\": [...]}", lineno, str(path)
                ) from None
            if not isinstance(word, str) or not isinstance(defs, list):
                raise CorpusFormatError("bad word/definitions types", lineno, str(path))
            if word in entries:
                raise CorpusFormatError(f"duplicate headword {word!r}", lineno, str(path))
            if not defs or not all(isinstance(d, str) and d for d in defs):
                raise CorpusFormatError(f"{word!r}: empty definition", lineno, str(path))
            entries[word] = defs
    return Dictionary(entries)


def load_knowledge_base(directory=None) -> KnowledgeBase:
    """Load ``pinyin.tsv``, ``visual_confusion.tsv`` and ``dictionary.jsonl``.

    ``directory`` defaults to ``$LEAD_KB_DIR``.
    """
    if directory is None:
        directory = os.environ.get("LEAD_KB_DIR")
        if not directory:
            raise FileNotFoundError("no knowledge-base directory given and LEAD_KB_DIR unset")
    d = Path(directory)
    return KnowledgeBase(
        load_pinyin_table(d / PINYIN_FILE),
        load_confusion_set(d / CONFUSION_FILE),
        load_dictionary(d / DICTIONARY_FILE),
    )


def write_knowledge_base(kb: KnowledgeBase, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / PINYIN_FILE, "w", encoding="utf-8") as fh:
        for c in sorted(kb.pinyin.readings):
            sylls = ",".join(sorted(str(s) for s in kb.pinyin.readings[c]))
            fh.write(f"{c}\t{sylls}\n")
    with open(d / CONFUSION_FILE, "w", encoding="utf-8") as fh:
        for c in sorted(kb.visual.similar):
            fh.write(f"{c}\t{''.join(sorted(kb.visual.similar[c]))}\n")
    with open(d / DICTIONARY_FILE, "w", encoding="utf-8") as fh:
        for w in kb.dictionary.words():
            rec = {"word": w, "definitions": list(kb.dictionary[w])}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


# -- relations -------------------------------------------------------------


def pinyin_of(char: str, table: PinyinTable) -> frozenset:
    return table.get(char)


def phonetically_similar(a: str, b: str, table: PinyinTable) -> bool:
    """True when ``a != b`` and they share a toneless syllable."""
    if a == b:
        return False
    return not table.bases(a).isdisjoint(table.bases(b))


def phonetically_disjoint(a: str, b: str, table: PinyinTable) -> bool:
    """True when both characters have readings and share no toneless syllable.

    Characters without readings are never counted as "different pinyin":
    nothing is known about them.
    """
    ra, rb = table.bases(a), table.bases(b)
    return bool(ra) and bool(rb) and ra.isdisjoint(rb)


def visually_similar(a: str, b: str, cs: VisualConfusionSet) -> bool:
    return b in cs.get(a)


# -- segmentation ----------------------------------------------------------


def tokenize(sentence: str, dictionary: Dictionary) -> list[WordSpan]:
    return MaxMatchTokenizer(dictionary.entries, dictionary.max_word_length).segment(sentence)


def span_containing(spans: Sequence[WordSpan], pos: int) -> WordSpan:
    if pos < 0:
        raise IndexError(f"position {pos} out of range")
    for span in spans:
        if pos in span:
            return span
    raise IndexError(f"position {pos} out of range")


# -- definition selection --------------------------------------------------


def _pooled(encoder, text: str) -> np.ndarray:
    rep = encoder.encode(text, truncate=True)
    return rep.values[: rep.valid_length].astype(np.float64).mean(axis=0)


def definition_similarities(context: str, definitions: Sequence[str], encoder) -> np.ndarray:
    """Cosine between the mean-pooled context and each definition."""
    ctx = _pooled(encoder, context)
    sims = np.empty(len(definitions))
    for i, d in enumerate(definitions):
        v = _pooled(encoder, d)
        denom = np.linalg.norm(ctx) * np.linalg.norm(v)
        sims[i] = float(ctx @ v / denom) if denom > 0 else -np.inf
    return sims


def select_definition(
    word: str,
    context: str,
    dictionary: Dictionary,
    strategy: str = "first",
    sim_encoder=None,
    rng: np.random.Generator | None = None,
) -> str:
    """Pick one definition of ``word``.

    ``similar`` returns the definition whose mean-pooled representation is
    closest (cosine) to the mean-pooled ``context``; ties go to the earlier
    definition.  Raises :class:`LookupMiss` for unknown words.
    """
    defs = dictionary[word]
    if strategy not in DEFINITION_STRATEGIES:
        raise ValueError(f"unknown definition strategy {strategy!r}")
    if strategy == "random":
        if rng is None:
            raise ValueError("the random strategy needs an rng")
        return defs[int(rng.integers(len(defs)))] if len(defs) > 1 else defs[0]
    if strategy == "first" or len(defs) == 1:
        return defs[0]
    if sim_encoder is None:
        raise ValueError("the similar strategy needs a sim_encoder")
    sims = definition_similarities(context, defs, sim_encoder)
    return defs[int(np.argmax(sims))]
