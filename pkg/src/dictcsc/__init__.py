"""Chinese spell checking with phonetic, visual and definition knowledge.

A small numpy transformer is fine-tuned on a character-level correction
objective plus three contrastive objectives that pull its representations
toward frozen knowledge encoders.
"""

from .data import CscSample, corpus_stats, load_corpus, save_corpus
from .encoders import (
    CscModel,
    EncoderConfig,
    FrozenEncoder,
    TransformerEncoder,
    Vocab,
    load_checkpoint,
    load_model,
    save_checkpoint,
)
from .evaluation import EvalReport, Prediction, evaluate, predict_many
from .knowledge import KnowledgeBase, load_knowledge_base
from .objectives import LossWeights, info_nce, MetricScores
from .pairs import ContrastiveBatch, KnowledgeKind, build_batch
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "CscSample",
    "corpus_stats",
    "load_corpus",
    "save_corpus",
    "CscModel",
    "EncoderConfig",
    "FrozenEncoder",
    "TransformerEncoder",
    "Vocab",
    "load_checkpoint",
    "load_model",
    "save_checkpoint",
    "EvalReport",
    "Prediction",
    "evaluate",
    "predict_many",
    "KnowledgeBase",
    "load_knowledge_base",
    "LossWeights",
    "MetricScores",
    "info_nce",
    "ContrastiveBatch",
    "KnowledgeKind",
    "build_batch",
    "TrainConfig",
    "train",
]
