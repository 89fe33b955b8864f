"""Small synthetic CSC worlds for desk-scale experiments.

Each world bundles a knowledge base with train/test corpora in which every
"class" character is always preceded by its own cue character, so fixing
an error needs the left context.  Errors swap a class character for
another member of the same class, i.e. a phonetically (ji/zhi) or
visually (新/营 groups) confusable character.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CscSample
from .knowledge import (
    Dictionary,
    KnowledgeBase,
    PinyinTable,
    VisualConfusionSet,
    parse_syllable,
)

__all__ = [
    "PHONETIC_CLASSES",
    "VISUAL_CLASSES",
    "FILLER_PINYIN",
    "SyntheticWorld",
    "make_world",
    "make_strategy_world",
    "StrategyWorld",
]

PHONETIC_CLASSES = {
    "ji": "机鸡积基激级极集",
    "zhi": "知之只支织直值职",
}
VISUAL_CLASSES = {
    "新": "新亲薪斩析所",
    "营": "营荣莹萤萦劳",
}
CLASS_PINYIN = {
    "机": "ji1", "鸡": "ji1", "积": "ji1", "基": "ji1", "激": "ji1",
    "级": "ji2", "极": "ji2", "集": "ji2",
    "知": "zhi1", "之": "zhi1", "只": "zhi1,zhi3", "支": "zhi1", "织": "zhi1",
    "直": "zhi2", "值": "zhi2", "职": "zhi2",
    "新": "xin1", "亲": "qin1", "薪": "xin1", "斩": "zhan3", "析": "xi1", "所": "suo3",
    "营": "ying2", "荣": "rong2", "莹": "ying2", "萤": "ying2", "萦": "ying2", "劳": "lao2",
}  # fmt: skip
FILLER_PINYIN = {
    "大": "da4", "人": "ren2", "天": "tian1", "上": "shang4", "下": "xia4", "山": "shan1",
    "水": "shui3", "火": "huo3", "木": "mu4", "土": "tu3", "日": "ri4", "月": "yue4",
    "中": "zhong1", "国": "guo2", "我": "wo3", "你": "ni3", "他": "ta1", "好": "hao3,hao4",
    "小": "xiao3", "多": "duo1", "少": "shao3", "来": "lai2", "去": "qu4", "是": "shi4",
    "不": "bu4", "有": "you3", "在": "zai4", "看": "kan4", "说": "shuo1", "书": "shu1",
    "车": "che1", "花": "hua1", "草": "cao3", "云": "yun2", "风": "feng1", "雨": "yu3",
    "门": "men2", "马": "ma3", "牛": "niu2", "羊": "yang2", "田": "tian2", "石": "shi2",
}  # fmt: skip


def _readings(table: dict) -> dict:
    return {c: [parse_syllable(s) for s in v.split(",")] for c, v in table.items()}


@dataclass
class SyntheticWorld:
    kb: KnowledgeBase
    train: list
    test: list
    classes: dict = field(default_factory=dict)
    cues: dict = field(default_factory=dict)

    def class_of(self, char: str) -> str | None:
        for name, members in self.classes.items():
            if char in members:
                return name
        return None


def _fill(rng, fillers, length):
    return [fillers[i] for i in rng.integers(len(fillers), size=length)]


def _make_samples(rng, prefix, count, cues, classes, fillers, clean_fraction, length_range, max_errors):
    """Sentences with ``max_errors`` cue+class-char slots; errors swap within a class."""
    lo, hi = length_range
    class_of = {c: members for members in classes.values() for c in members}
    targets = sorted(class_of)
    out = []
    for k in range(count):
        n = int(rng.integers(lo, hi + 1))
        chars = _fill(rng, fillers, n)
        source = list(chars)
        slots = int(rng.integers(1, max_errors + 1))
        starts = sorted(rng.choice(np.arange(0, n - 1, 2), size=slots, replace=False))
        clean = rng.random() < clean_fraction
        for st in starts:
            c = targets[int(rng.integers(len(targets)))]
            chars[st], chars[st + 1] = cues[c], c
            source[st], source[st + 1] = cues[c], c
            if not clean:
                others = [o for o in class_of[c] if o != c]
                source[st + 1] = others[int(rng.integers(len(others)))]
        out.append(CscSample(f"{prefix}{k:04d}", "".join(source), "".join(chars)))
    return out


def make_world(
    seed: int = 0,
    n_train: int = 50,
    n_test: int = 0,
    kinds: str = "PV",
    clean_fraction: float = 0.2,
    length_range=(8, 12),
    max_errors: int = 1,
    class_size: int = 0,
) -> SyntheticWorld:
    """Corpus over the phonetic (``P``) and/or visual (``V``) class characters.

    Every class character gets a unique cue character from the filler pool;
    the dictionary holds each cue+character word with a short filler
    definition that ends in the word itself.  ``class_size`` > 0 keeps only
    the first members of each class.
    """
    rng = np.random.default_rng(seed)
    classes = {}
    if "P" in kinds:
        classes.update({k: v for k, v in PHONETIC_CLASSES.items()})
    if "V" in kinds:
        classes.update({k: v for k, v in VISUAL_CLASSES.items()})
    if class_size > 0:
        classes = {k: v[:class_size] for k, v in classes.items()}
    members = [c for v in classes.values() for c in v]
    filler_chars = sorted(FILLER_PINYIN)
    order = rng.permutation(len(filler_chars))
    cue_pool = [filler_chars[i] for i in order]
    cues = {c: cue_pool[i % len(cue_pool)] for i, c in enumerate(members)}

    pinyin = PinyinTable(_readings({**FILLER_PINYIN, **{c: CLASS_PINYIN[c] for c in members}}))
    similar = {}
    for name, group in classes.items():
        if name in VISUAL_CLASSES:
            for c in group:
                similar[c] = [o for o in group if o != c]
    entries = {}
    for c in members:
        word = cues[c] + c
        body = "".join(_fill(rng, filler_chars, 4))
        entries[word] = [body + word]
    for f in filler_chars:
        entries.setdefault(f, ["".join(_fill(rng, filler_chars, 3)) + f])
    kb = KnowledgeBase(pinyin, VisualConfusionSet(similar), Dictionary(entries))

    train = _make_samples(
        rng, "tr", n_train, cues, classes, filler_chars, clean_fraction, length_range, max_errors
    )
    test = _make_samples(
        rng, "te", n_test, cues, classes, filler_chars, clean_fraction, length_range, max_errors
    )
    return SyntheticWorld(kb, train, test, classes, cues)


@dataclass
class StrategyWorld(SyntheticWorld):
    topics: list = field(default_factory=list)
    home_topic: dict = field(default_factory=dict)


def make_strategy_world(
    seed: int = 0,
    n_train: int = 30,
    n_test: int = 300,
    n_senses: int = 3,
    first_fraction: float = 0.5,
    topic_size: int = 4,
    class_size: int = 4,
    length_range=(8, 12),
    clean_fraction: float = 0.2,
    topic_mix: float = 0.8,
    body_length: int = 4,
    name_repeat: int = 4,
) -> StrategyWorld:
    """World with polysemous dictionary entries whose right sense depends on context.

    Every class character is a dictionary entry with ``n_senses`` senses,
    sense ``t`` being written in topic ``t``'s characters (cue words are
    not entries, so the definition span is the character alone).  Each
    character has a home topic: its
    sentences draw ``topic_mix`` of their filler from that topic, its home
    sense names the correct character and the other senses name a
    confusable sibling.  Sense 0 is home for a ``first_fraction`` share of
    the words, so "first" is right for those only, while the sense most
    similar to the context is the home sense.
    """
    rng = np.random.default_rng(seed)
    classes = {k: v[:class_size] for k, v in PHONETIC_CLASSES.items()}
    members = [c for v in classes.values() for c in v]
    class_of = {c: grp for grp in classes.values() for c in grp}
    filler_chars = sorted(FILLER_PINYIN)
    pool = [filler_chars[i] for i in rng.permutation(len(filler_chars))]
    cues = {c: pool[i] for i, c in enumerate(members)}
    rest = pool[len(members) :]
    topics = [rest[t * topic_size : (t + 1) * topic_size] for t in range(n_senses)]
    general = rest[n_senses * topic_size :]
    if len(general) < 2:
        raise ValueError("not enough filler characters for the requested topics")

    n_first = int(round(first_fraction * len(members)))
    order = rng.permutation(len(members))
    home = {}
    for rank, idx in enumerate(order):
        home[members[idx]] = 0 if rank < n_first else 1 + int(rng.integers(n_senses - 1))

    confuser = {}
    for c in members:
        siblings = [o for o in class_of[c] if o != c]
        confuser[c] = siblings[int(rng.integers(len(siblings)))]
    entries = {}
    for c in members:
        senses = []
        for t in range(n_senses):
            named = c if t == home[c] else confuser[c]
            senses.append("".join(_fill(rng, topics[t], body_length)) + named * name_repeat)
        entries[c] = senses
    for f in filler_chars:
        entries.setdefault(f, ["".join(_fill(rng, general, 3)) + f])
    kb = KnowledgeBase(
        PinyinTable(_readings({**FILLER_PINYIN, **{c: CLASS_PINYIN[c] for c in members}})),
        VisualConfusionSet({}),
        Dictionary(entries),
    )

    def sample(prefix, k):
        c = members[int(rng.integers(len(members)))]
        n = int(rng.integers(length_range[0], length_range[1] + 1))
        chars = [
            topics[home[c]][int(rng.integers(topic_size))]
            if rng.random() < topic_mix
            else general[int(rng.integers(len(general)))]
            for _ in range(n)
        ]
        st = int(rng.choice(np.arange(0, n - 1, 2)))
        chars[st], chars[st + 1] = cues[c], c
        source = list(chars)
        if rng.random() >= clean_fraction:
            source[st + 1] = confuser[c]
        return CscSample(f"{prefix}{k:04d}", "".join(source), "".join(chars))

    train = [sample("tr", k) for k in range(n_train)]
    test = [sample("te", k) for k in range(n_test)]
    return StrategyWorld(kb, train, test, classes, cues, topics, dict(home))
