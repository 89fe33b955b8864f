# %% [markdown]
# # Training the CSC model
#
# The CSC encoder and its output head train on cross-entropy plus the three
# contrastive losses.  Frozen snapshots of the initial encoder provide the
# knowledge-side representations.  A small model should memorise a
# 50-sentence corpus in a few seconds.

# %%
import time

from dictcsc.evaluation import evaluate, predict_many
from dictcsc.objectives import LossWeights
from dictcsc.synthetic import make_world
from dictcsc.trainer import ModelSettings, TrainConfig, train

world = make_world(seed=0, n_train=50, class_size=4)
config = TrainConfig(epochs=10, batch_size=2, learning_rate=5e-3, max_length=32,
                     definition_strategy="first", weights=LossWeights(1, 1, 1, 1))
start = time.perf_counter()
result = train(config, world.train, world.kb, settings=ModelSettings(hidden_size=64, layers=2))
print(f"{result.total_steps} steps in {time.perf_counter() - start:.1f}s")

# %%
for rec in result.log[:: max(1, len(result.log) // 8)]:
    print({k: round(v, 4) if isinstance(v, float) else v for k, v in rec.items()})

# %%
preds = predict_many(result.model, [s.source for s in world.train], [s.id for s in world.train])
report = evaluate(preds, world.train)
print("training-set correction F1:", report.correction.f1)
