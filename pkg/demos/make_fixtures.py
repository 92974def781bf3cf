"""Regenerate the small datasets bundled under src/slackrescale/data.

yeast_style.svm     14 labels, 24 features, 150 examples (100 train / 50 test)
hierarchy.svm       10-node label forest, 12 features, 120 examples
hierarchy.parents   the forest in parent-list form

Both are drawn from planted linear rules with a few flipped label bits, so
they are learnable but not separable.
"""
from pathlib import Path

from slackrescale.data import dump_multilabel, planted_hierarchy, planted_multilabel

OUT = Path(__file__).resolve().parents[1] / "src" / "slackrescale" / "data"
PARENTS = [-1, 0, 0, 1, 1, 2, -1, 6, 6, 7]

OUT.mkdir(parents=True, exist_ok=True)
ds = planted_multilabel(150, 24, 14, seed=7, flip=0.05, test_fraction=1 / 3)
dump_multilabel(ds, OUT / "yeast_style.svm")
print("yeast_style:", len(ds), "examples, mean labels per example", ds.Y.sum(1).mean())

hd = planted_hierarchy(120, 12, PARENTS, seed=3, flip=0.03, test_fraction=1 / 3)
dump_multilabel(hd, OUT / "hierarchy.svm")
(OUT / "hierarchy.parents").write_text("".join(f"{j} {p}\n" for j, p in enumerate(PARENTS)))
print("hierarchy:", len(hd), "examples, mean labels per example", hd.Y.sum(1).mean())
