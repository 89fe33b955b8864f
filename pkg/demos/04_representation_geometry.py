# %% [markdown]
# # How the phonetic objective reshapes character representations
#
# Two pinyin classes (ji / zhi).  We train twice from the same seed, once
# with cross-entropy only and once with the phonetic contrastive loss, and
# compare mean dot products inside and across classes.

# %%
from itertools import combinations

import numpy as np

from dictcsc.cli import pca_2d
from dictcsc.objectives import LossWeights
from dictcsc.synthetic import make_world
from dictcsc.trainer import TrainConfig, train

world = make_world(seed=0, n_train=100, kinds="P")


def gap(model):
    reps = {c: model.encoder.encode(c).values[0] for m in world.classes.values() for c in m}
    label = {c: k for k, m in world.classes.items() for c in m}
    intra = [reps[a] @ reps[b] for a, b in combinations(reps, 2) if label[a] == label[b]]
    inter = [reps[a] @ reps[b] for a, b in combinations(reps, 2) if label[a] != label[b]]
    return float(np.mean(intra)), float(np.mean(inter)), reps


models = {}
for name, weights in (("csc only", (1, 0, 0, 0)), ("csc + phonetic", (1, 1, 0, 0))):
    cfg = TrainConfig(epochs=10, batch_size=4, learning_rate=5e-3, max_length=32, weights=LossWeights(*weights))
    models[name] = train(cfg, world.train, world.kb).model
    intra, inter, _ = gap(models[name])
    print(f"{name:>15}: intra {intra:8.2f}  inter {inter:8.2f}  gap {intra - inter:8.2f}")

# %% [markdown]
# A 2-D projection of the contrastive model's class characters.  The same
# projection is available from the command line via `export-reps --pca2d`.

# %%
_, _, reps = gap(models["csc + phonetic"])
chars = list(reps)
xy = pca_2d(np.stack([reps[c] for c in chars]))
for c, (x, y) in zip(chars, xy):
    print(c, world.class_of(c), f"{x:8.2f} {y:8.2f}")
