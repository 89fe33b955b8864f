# %% [markdown]
# # The whole pipeline through the command-line entry point
#
# Every subcommand is reachable in-process through `dictcsc.cli.main`, which
# is what the `dictcsc` console script calls.

# %%
import os
import tempfile
from pathlib import Path

from dictcsc.cli import main
from dictcsc.data import save_corpus
from dictcsc.knowledge import write_knowledge_base
from dictcsc.synthetic import make_world

work = Path(tempfile.mkdtemp(prefix="dictcsc-cli-"))
world = make_world(seed=0, n_train=120, n_test=40, class_size=4)
(work / "chars.txt").write_text("".join(m for m in world.classes.values()), encoding="utf-8")
write_knowledge_base(world.kb, work / "kb")
save_corpus(world.train, work / "train.tsv")
save_corpus(world.test, work / "test.tsv")
os.environ["LEAD_KB_DIR"] = str(work / "kb")

# %%
(work / "run.ini").write_text(
    "[train]\nepochs = 10\nbatch_size = 4\nlearning_rate = 5e-3\nmax_length = 32\n"
    "definition_strategy = first\n",
    encoding="utf-8",
)
steps = [
    ["prepare", "--input", work / "train.tsv", "--output", work / "train.clean.tsv"],
    ["build-pairs", "--corpus", work / "train.clean.tsv", "--knowledge", "P", "--n", "4", "--output", work / "pairs" / "p.jsonl"],
    ["train", "--config", work / "run.ini", "--train", work / "train.clean.tsv", "--out-dir", work / "run"],
    ["evaluate", "--checkpoint", work / "run" / "epoch-010", "--test", work / "test.tsv", "--report", work / "eval.json"],
    ["export-reps", "--checkpoint", work / "run" / "epoch-010", "--chars-file", work / "chars.txt",
     "--output", work / "reps.tsv", "--pca2d"],
]
(work / "pairs").mkdir()
for argv in steps:
    code = main([str(a) for a in argv])
    print(argv[0], "->", code)

# %%
print(sorted(p.name for p in work.iterdir()))
print((work / "eval.txt").read_text(encoding="utf-8"))
