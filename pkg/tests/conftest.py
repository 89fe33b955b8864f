from pathlib import Path

import numpy as np
import pytest

from dictcsc.encoders import EncoderConfig, TransformerEncoder
from dictcsc.knowledge import load_knowledge_base

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def kb():
    return load_knowledge_base(DATA / "kb")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_encoder(chars, hidden=8, layers=1, heads=2, max_length=16, seed=0, dtype="float64"):
    cfg = EncoderConfig(
        vocab=tuple(chars),
        hidden_size=hidden,
        layers=layers,
        heads=heads,
        max_length=max_length,
        seed=seed,
        dtype=dtype,
    )
    return TransformerEncoder(cfg)


# Sentences built from fixture dictionary words; each error is a known
# phonetic or visual confusion so that P, V and D batches can all be built.
WORDS = ["那时", "天气", "非常", "好", "街上", "正在", "洒水", "我们", "舞会", "误会", "一个", "举办", "水"]
CONFUSIONS = {"气": "起", "洒": "晒", "在": "再", "会": "汇", "水": "谁"}


def random_sample(rng, max_len=8, sample_id="r"):
    from dictcsc.data import CscSample

    words = []
    while True:
        w = WORDS[rng.integers(len(WORDS))]
        if sum(map(len, words)) + len(w) > max_len:
            break
        words.append(w)
    target = "".join(words) or "好"
    spots = [i for i, c in enumerate(target) if c in CONFUSIONS]
    source = list(target)
    for i in spots:
        if rng.random() < 0.7:
            source[i] = CONFUSIONS[target[i]]
    return CscSample(sample_id, "".join(source), target)
