# %% [markdown]
# # Corpora: loading, charset conversion, statistics
#
# A corpus is a list of `CscSample(id, source, target)` with equal-length
# source and target.  Error positions are derived, never stored.

# %%
import tempfile
from pathlib import Path

from dictcsc.data import CscSample, convert_charset, corpus_stats, load_corpus, save_corpus
from dictcsc.synthetic import make_world

work = Path(tempfile.mkdtemp(prefix="dictcsc-demo-"))
world = make_world(seed=0, n_train=20)
for s in world.train[:3]:
    print(s.id, s.source, "->", s.target, "errors at", s.error_positions)

# %% [markdown]
# Both on-disk layouts (TSV and JSON lines) round-trip to the same samples.

# %%
save_corpus(world.train, work / "train.tsv")
save_corpus(world.train, work / "train.jsonl")
assert load_corpus(work / "train.tsv") == load_corpus(work / "train.jsonl") == world.train
print((work / "train.tsv").read_text(encoding="utf-8").splitlines()[0])

# %% [markdown]
# Traditional-to-simplified conversion is a per-character table lookup, so
# lengths (and therefore error positions) are preserved.

# %%
table = {"時": "时", "們": "们", "會": "会"}
trad = CscSample("t", "我們那時在舞會", "我們那時在舞會")
print(convert_charset(trad, table).source)

# %%
stats = corpus_stats(world.train)
print(stats.to_dict())
