# %% [markdown]
# # Knowledge base and contrastive batches
#
# The knowledge base bundles a pinyin table, a visual confusion set and a
# dictionary.  For an error position, a batch holds the original sentence,
# one positive and N negatives built from one of the three knowledge kinds.

# %%
import numpy as np

from dictcsc.knowledge import pinyin_of, select_definition, span_containing, tokenize
from dictcsc.pairs import build_batch
from dictcsc.synthetic import make_world

world = make_world(seed=1, n_train=10)
kb = world.kb
sample = next(s for s in world.train if s.has_errors)
s = sample.error_positions[0]
err = sample.source[s]
print("sentence:", sample.source, "| gold:", sample.target, "| error char:", err, "at", s)
print("readings of", err, "=", sorted(str(x) for x in pinyin_of(err, kb.pinyin)))

# %% [markdown]
# Phonetic batches swap the error character for one sharing a toneless
# syllable (positive) or sharing none (negatives).

# %%
vocab = sorted(kb.characters())
rng = np.random.default_rng(0)
for kind in ("P", "V", "D"):
    try:
        b = build_batch(kind, sample, s, 4, kb, vocab, rng, strategy="first")
    except Exception as exc:  # a kind may not apply to this character
        print(kind, "skipped:", exc)
        continue
    print(kind, "positive:", b.positive, "negatives:", list(b.negatives), "span", b.error_index, b.span_width)

# %% [markdown]
# Definitions are chosen for the word containing the error, found by
# forward maximum matching on the gold sentence.

# %%
spans = tokenize(sample.target, kb.dictionary)
word = span_containing(spans, s)
print([w.word for w in spans], "->", word.word, "->", select_definition(word.word, sample.target, kb.dictionary, "first"))
