# %% [markdown]
# # Choosing among several dictionary senses
#
# In this world every class character has three senses.  Only the sense
# whose topic matches the sentence names the character itself; the others
# name its confusable sibling.  Picking the context-matching sense should
# therefore help the definition objective most.
#
# A copy-task warm-up stands in for a pre-trained encoder, so the frozen
# definition encoder produces features the CSC head can read.
#
# The ordering is a tendency, not a guarantee: over seeds 100-108 it holds
# on six of nine (see the acceptance suite).  Seed 102 below is a miss.

# %%
from dictcsc.evaluation import evaluate, predict_many
from dictcsc.objectives import LossWeights
from dictcsc.synthetic import make_strategy_world
from dictcsc.trainer import TrainConfig, pretrain_copy, train

for seed in (100, 101, 102):
    world = make_strategy_world(seed=seed)
    texts = [s.target for s in world.train] + [d for w in world.kb.dictionary.words() for d in world.kb.dictionary[w]]
    warm = pretrain_copy(texts, world.kb, TrainConfig(epochs=3, batch_size=8, learning_rate=5e-3, max_length=32, seed=seed))
    row = {}
    for strategy in ("similar", "first", "random"):
        cfg = TrainConfig(epochs=8, batch_size=4, learning_rate=5e-3, max_length=32, seed=seed,
                          weights=LossWeights(1, 0, 0, 1), definition_strategy=strategy, cosine_temperature=0.5)
        model = train(cfg, world.train, world.kb, model=warm.copy()).model
        preds = predict_many(model, [s.source for s in world.test], [s.id for s in world.test])
        row[strategy] = evaluate(preds, world.test).correction.f1
    print(seed, {k: round(v, 3) for k, v in row.items()})
