"""Command-line entry point: ``dictcsc <command> ...``.

Commands write data only to files; progress and errors go to stderr.
Every run leaves one ``*.manifest.json`` beside its outputs recording the
resolved configuration, seed, tool version, timestamps and SHA-256
digests of every input.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    CorpusFormatError,
    SampleValidationError,
    convert_charset,
    corpus_stats,
    load_charmap,
    load_corpus,
    save_corpus,
)
from .encoders import CheckpointError, load_checkpoint, load_model
from .evaluation import (
    AlignmentError,
    evaluate,
    load_predictions,
    predict_many,
    render_report,
    save_predictions,
    write_report,
)
from .knowledge import load_knowledge_base
from .pairs import (
    InsufficientCandidates,
    KnowledgeKind,
    SkipBatch,
    build_batch,
    iter_error_positions,
    read_batches,
    write_batches,
)
from .trainer import (
    ConfigError,
    ModelSettings,
    TrainConfig,
    TrainingError,
    build_model,
    build_vocab,
    config_to_dict,
    load_config_file,
    train,
)
from .knowledge import DEFINITION_STRATEGIES

log = logging.getLogger("dictcsc")

KB_ENV = "LEAD_KB_DIR"


class CommandError(RuntimeError):
    """A command could not meet its postcondition."""


# -- run manifests ---------------------------------------------------------


def digest(path) -> str:
    """SHA-256 of a file, or of a directory's (relative name, content) pairs."""
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(f.relative_to(path).as_posix()).encode("utf-8") + b"\0")
            h.update(f.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


@dataclasses.dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict
    seed: int | None
    version: str = __version__
    started: float = dataclasses.field(default_factory=time.time)
    finished: float | None = None

    def write(self, path) -> Path:
        self.finished = time.time()
        rec = dataclasses.asdict(self)
        rec["inputs"] = {k: {"path": str(v), "sha256": digest(v)} for k, v in self.inputs.items()}
        for key in ("started", "finished"):
            rec[key] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(rec[key]))
        path = Path(path)
        path.write_text(json.dumps(rec, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        return path


def _manifest_beside(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def _kb_dir(arg) -> str:
    d = arg or os.environ.get(KB_ENV)
    if not d:
        raise CommandError(f"no knowledge base: pass --kb-dir or set {KB_ENV}")
    return d


# -- prepare ---------------------------------------------------------------


def cmd_prepare(args) -> int:
    samples = load_corpus(args.input, None if args.format == "auto" else args.format)
    inputs = {"input": args.input}
    if args.charmap:
        mapping = load_charmap(args.charmap)
        samples = [convert_charset(s, mapping) for s in samples]
        inputs["charmap"] = args.charmap
    else:
        log.info("no --charmap given; charset conversion skipped")
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(samples, out, "tsv")
    stats = corpus_stats(samples)
    stats_path = out.with_name(out.name + ".stats.json")
    stats_path.write_text(json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8")
    RunManifest("prepare", {"format": args.format, "charmap": bool(args.charmap)}, inputs, None).write(
        _manifest_beside(out)
    )
    log.info(
        "%d sentences, avg length %.2f, %d errors",
        stats.sentence_count,
        stats.avg_length,
        stats.error_count,
    )
    return 0


# -- build-pairs -----------------------------------------------------------


def cmd_build_pairs(args) -> int:
    kb_dir = _kb_dir(args.kb_dir)
    kb = load_knowledge_base(kb_dir)
    samples = load_corpus(args.corpus)
    kind = KnowledgeKind(args.knowledge)
    inputs = {"corpus": args.corpus, "kb_dir": kb_dir}

    sim_encoder = None
    if kind is KnowledgeKind.D and args.strategy == "similar":
        if args.checkpoint:
            sim_encoder = load_checkpoint(args.checkpoint)
            inputs["checkpoint"] = args.checkpoint
        else:
            # same untrained encoder that `train` would freeze as E_D
            config = TrainConfig(seed=args.seed)
            sim_encoder = build_model(build_vocab(samples, kb), ModelSettings(), config).encoder
    vocab = sorted(build_vocab(samples, kb).chars)
    rng = np.random.default_rng(args.seed)

    batches, skipped = [], 0
    for sample, s in iter_error_positions(samples, args.cap):
        try:
            batches.append(
                build_batch(kind, sample, s, args.n, kb, vocab, rng, args.strategy, sim_encoder)
            )
        except SkipBatch as exc:
            skipped += 1
            log.debug("skipped %s@%d: %s", sample.id, s, exc)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = write_batches(batches, out)
    RunManifest(
        "build-pairs",
        {"knowledge": kind.value, "n": args.n, "strategy": args.strategy, "cap": args.cap,
         "written": count, "skipped": skipped},
        inputs,
        args.seed,
    ).write(_manifest_beside(out))
    log.info("wrote %d %s batches (%d positions skipped)", count, kind.value, skipped)
    return 0


# -- train -----------------------------------------------------------------


def _read_pairs_dir(path) -> dict:
    files = sorted(Path(path).glob("*.jsonl"))
    if not files:
        raise CommandError(f"no *.jsonl batch files in {path}")
    out: dict = {}
    for f in files:
        for b in read_batches(f):
            out.setdefault(b.kind, []).append(b)
    return out


def cmd_train(args) -> int:
    if args.config:
        config, settings = load_config_file(args.config)
    else:
        config, settings = TrainConfig(), ModelSettings()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    kb_dir = _kb_dir(args.kb_dir)
    kb = load_knowledge_base(kb_dir)
    samples = load_corpus(args.train)
    inputs = {"train": args.train, "kb_dir": kb_dir}
    if args.config:
        inputs["config"] = args.config
    offline = None
    if args.pairs_dir:
        offline = _read_pairs_dir(args.pairs_dir)
        inputs["pairs_dir"] = args.pairs_dir
    for key in ("init_checkpoint", "phonetic_checkpoint", "visual_checkpoint", "definition_checkpoint"):
        if getattr(settings, key):
            inputs[key] = getattr(settings, key)

    out_dir = Path(args.out_dir)
    result = train(config, samples, kb, settings=settings, out_dir=out_dir, offline_batches=offline)

    preds = predict_many(result.model, [s.source for s in samples], [s.id for s in samples])
    report = evaluate(preds, samples)
    char_total = sum(len(s.target) for s in samples)
    char_hits = sum(a == b for p, s in zip(preds, samples) for a, b in zip(p.output, s.target))
    summary = {
        "total_steps": result.total_steps,
        "final_loss": result.log[-1]["total"] if result.log else None,
        "train_correction_f1": report.correction.f1,
        "train_detection_f1": report.detection.f1,
        "train_sentence_accuracy": sum(p.output == s.target for p, s in zip(preds, samples))
        / len(samples),
        "train_char_accuracy": char_hits / char_total,
        "checkpoints": [str(p) for p in result.checkpoints],
    }
    (out_dir / "train_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    RunManifest("train", config_to_dict(config, settings), inputs, config.seed).write(
        out_dir / "run.manifest.json"
    )
    print(
        f"trained {result.total_steps} steps; training-set correction F1 "
        f"{report.correction.f1:.4f}, sentence accuracy {summary['train_sentence_accuracy']:.4f}",
        file=sys.stderr,
    )
    return 0


# -- evaluate --------------------------------------------------------------


def cmd_evaluate(args) -> int:
    gold = load_corpus(args.test)
    inputs = {"test": args.test}
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    if args.checkpoint:
        model = load_model(args.checkpoint)
        preds = predict_many(model, [s.source for s in gold], [s.id for s in gold])
        save_predictions(preds, report_path.with_name(report_path.stem + ".predictions.tsv"))
        inputs["checkpoint"] = args.checkpoint
    else:
        preds = load_predictions(args.predictions)
        inputs["predictions"] = args.predictions
    report = evaluate(preds, gold, sighan13_mode=args.sighan13)
    write_report(report, report_path)
    RunManifest("evaluate", {"sighan13": args.sighan13}, inputs, None).write(
        _manifest_beside(report_path)
    )
    sys.stderr.write(render_report(report))
    return 0


# -- export-reps -----------------------------------------------------------


def pca_2d(x: np.ndarray, rel_tol: float = 1e-6) -> np.ndarray:
    """Deterministic 2-component PCA projection of the rows of ``x``.

    Each component's loading vector is sign-fixed so that its
    largest-magnitude entry is positive.  Components whose singular value
    is negligible relative to the largest are reported as zeros.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((x.shape[0], 2))
    if x.shape[0] == 0:
        return out
    centered = x - x.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    top = sv[0] if sv.size else 0.0
    for k in range(min(2, sv.size)):
        if top == 0 or sv[k] <= rel_tol * top:
            continue
        comp = vt[k]
        if comp[np.argmax(np.abs(comp))] < 0:
            comp = -comp
        out[:, k] = centered @ comp
    return out


def _write_rows(path, chars, matrix, skipped, fmt="%.8g"):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c, row in zip(chars, matrix):
            fh.write(c + "\t" + "\t".join(fmt % v for v in row) + "\n")
        if skipped:
            fh.write("# skipped\n")
            for c in skipped:
                fh.write(f"# {c}\n")


def cmd_export_reps(args) -> int:
    encoder = load_checkpoint(args.checkpoint)
    wanted = []
    with open(args.chars_file, encoding="utf-8") as fh:
        for line in fh:
            for c in line.strip():
                if c not in wanted:
                    wanted.append(c)
    kept = [c for c in wanted if c in encoder.vocab]
    skipped = [c for c in wanted if c not in encoder.vocab]
    reps = (
        np.stack([encoder.encode(c).values[0] for c in kept])
        if kept
        else np.zeros((0, encoder.config.hidden_size))
    )
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out, kept, reps, skipped)
    if args.pca2d:
        _write_rows(out.with_name(out.stem + ".pca2d.tsv"), kept, pca_2d(reps), skipped)
    RunManifest(
        "export-reps",
        {"pca2d": args.pca2d, "exported": len(kept), "skipped": skipped},
        {"checkpoint": args.checkpoint, "chars_file": args.chars_file},
        None,
    ).write(_manifest_beside(out))
    if skipped:
        log.warning("skipped %d character(s) outside the vocabulary: %s", len(skipped), "".join(skipped))
    return 0


# -- argument parsing ------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dictcsc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prepare", help="validate, convert and re-save a corpus with statistics")
    sp.add_argument("--input", required=True)
    sp.add_argument("--charmap", help="two-column character mapping table")
    sp.add_argument("--output", required=True, help="canonical TSV output path")
    sp.add_argument("--format", choices=("auto", "tsv", "jsonl"), default="auto",
                    help="input format (default: by extension)")
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("build-pairs", help="precompute contrastive batches to JSON lines")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--kb-dir", help=f"knowledge-base directory (default ${KB_ENV})")
    sp.add_argument("--knowledge", required=True, choices=[k.value for k in KnowledgeKind])
    sp.add_argument("--n", type=_positive_int, default=8, help="negatives per batch")
    sp.add_argument("--strategy", choices=DEFINITION_STRATEGIES, default="similar")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cap", type=int, default=0, help="max batches per sample (0 = all errors)")
    sp.add_argument("--checkpoint", help="encoder used to score definitions for --strategy similar")
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_build_pairs)

    sp = sub.add_parser("train", help="fine-tune the CSC model")
    sp.add_argument("--config", help="INI file with [train]/[objectives]/[model]/[encoders]")
    sp.add_argument("--train", required=True)
    sp.add_argument("--kb-dir", help=f"knowledge-base directory (default ${KB_ENV})")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--pairs-dir", help="directory of build-pairs outputs to use instead of online pairs")
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="sentence-level detection/correction scores")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint", help="CSC model checkpoint to predict with")
    src.add_argument("--predictions", help="TSV of id, source, output")
    sp.add_argument("--test", required=True)
    sp.add_argument("--sighan13", action="store_true", help="ignore 的/地/得 positions")
    sp.add_argument("--report", required=True, help="JSON report path (a .txt table is written beside it)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("export-reps", help="dump per-character representations")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--chars-file", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--pca2d", action="store_true", help="also write a 2-D PCA projection")
    sp.set_defaults(func=cmd_export_reps)
    return p


_EXPECTED = (
    CommandError,
    ConfigError,
    TrainingError,
    CorpusFormatError,
    SampleValidationError,
    CheckpointError,
    AlignmentError,
    InsufficientCandidates,
    FileNotFoundError,
    OSError,
    ValueError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except _EXPECTED as exc:
        print(f"dictcsc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
