"""CSC corpus loading, charset conversion and corpus statistics.

Corpora are substitution-only: every sample pairs a possibly erroneous
``source`` sentence with a gold ``target`` of the same length.  Positions
are Unicode code-point indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

__all__ = [
    "CorpusFormatError",
    "SampleValidationError",
    "CscSample",
    "CorpusStats",
    "diff_positions",
    "load_corpus",
    "save_corpus",
    "load_charmap",
    "convert_charset",
    "corpus_stats",
]


class CorpusFormatError(ValueError):
    """A corpus or table file has a malformed line."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path


class SampleValidationError(ValueError):
    """A record decodes but violates the CSC sample invariants."""

    def __init__(self, sample_id: str, message: str):
        super().__init__(f"sample {sample_id!r}: {message}")
        self.sample_id = sample_id


def diff_positions(source: str, target: str) -> tuple[int, ...]:
    return tuple(i for i, (a, b) in enumerate(zip(source, target)) if a != b)


@dataclass(frozen=True)
class CscSample:
    """One (source, target) pair; ``error_positions`` is derived, never given."""

    id: str
    source: str
    target: str
    error_positions: tuple[int, ...] = field(init=False, compare=False)

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise SampleValidationError(
                self.id,
                f"source length {len(self.source)} != target length {len(self.target)}",
            )
        object.__setattr__(self, "error_positions", diff_positions(self.source, self.target))

    @property
    def has_errors(self) -> bool:
        return bool(self.error_positions)

    def to_dict(self) -> dict:
        return {"id": self.id, "source": self.source, "target": self.target}


@dataclass(frozen=True)
class CorpusStats:
    sentence_count: int
    avg_length: float
    error_count: int

    def to_dict(self) -> dict:
        return {
            "sentence_count": self.sentence_count,
            "avg_length": self.avg_length,
            "error_count": self.error_count,
        }


def _infer_format(path: Path) -> str:
    return "jsonl" if path.suffix.lower() in (".jsonl", ".json") else "tsv"


def _parse_tsv_line(line: str, lineno: int, path: str) -> tuple[str, str, str]:
    parts = line.split("\t")
    if len(parts) != 3:
        raise CorpusFormatError(
            f"expected 3 tab-separated fields (id, source, target), got {len(parts)}",
            lineno,
            path,
        )
    return parts[0], parts[1], parts[2]


def _parse_jsonl_line(line: str, lineno: int, path: str) -> tuple[str, str, str]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"invalid JSON ({exc.msg})", lineno, path) from None
    if not isinstance(record, dict):
        raise CorpusFormatError("record is not a JSON object", lineno, path)
    missing = [k for k in ("id", "source", "target") if k not in record]
    if missing:
        raise CorpusFormatError(f"missing key(s): {', '.join(missing)}", lineno, path)
    values = (record["id"], record["source"], record["target"])
    if not all(isinstance(v, str) for v in values):
        raise CorpusFormatError("id, source and target must be strings", lineno, path)
    return values


def load_corpus(path, format: str | None = None) -> list[CscSample]:
    """Read a TSV (``id<TAB>source<TAB>target``) or JSON-lines corpus.

    Blank lines are ignored.  Malformed lines raise
    :class:`CorpusFormatError` with the 1-based line number; records whose
    source and target lengths differ raise :class:`SampleValidationError`.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt not in ("tsv", "jsonl"):
        raise ValueError(f"unknown corpus format {fmt!r}")
    parse = _parse_tsv_line if fmt == "tsv" else _parse_jsonl_line
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            sid, source, target = parse(line, lineno, str(path))
            samples.append(CscSample(sid, source, target))
    return samples


def save_corpus(samples: Iterable[CscSample], path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or _infer_format(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            if fmt == "tsv":
                for text in (s.id, s.source, s.target):
                    if "\t" in text or "\n" in text:
                        raise ValueError(f"sample {s.id!r} contains a tab or newline")
                fh.write(f"{s.id}\t{s.source}\t{s.target}\n")
            else:
                fh.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")


def load_charmap(path) -> dict[str, str]:
    """Read a ``traditional<TAB>simplified`` table of single characters."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or len(parts[0]) != 1 or len(parts[1]) != 1:
                raise CorpusFormatError(
                    "expected 'char<TAB>char' with single characters", lineno, str(path)
                )
            key, value = parts
            if mapping.get(key, value) != value:
                raise CorpusFormatError(
                    f"{key!r} mapped to both {mapping[key]!r} and {value!r}",
                    lineno,
                    str(path),
                )
            mapping[key] = value
    return mapping


def convert_charset(sample: CscSample, mapping: Mapping[str, str]) -> CscSample:
    if not mapping:
        return sample
    source = "".join(mapping.get(c, c) for c in sample.source)
    target = "".join(mapping.get(c, c) for c in sample.target)
    return CscSample(sample.id, source, target)


def corpus_stats(samples: Iterable[CscSample]) -> CorpusStats:
    n = chars = errors = 0
    for s in samples:
        n += 1
        chars += len(s.source)
        errors += len(s.error_positions)
    return CorpusStats(n, chars / n if n else 0.0, errors)
