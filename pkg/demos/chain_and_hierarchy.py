"""
Structured label spaces
=======================

The plain oracle works on any label space with a decomposable loss: Viterbi
for tag sequences and a tree dynamic program for label forests where a
child may only be on if its parent is.  The baseline searches run on top of
these oracles unchanged; for the angular search the labels are enumerated.
"""

import numpy as np

from slackrescale import ModelState, evaluate, run_search, sgd_train
from slackrescale.data import fixture_path, load_multilabel, load_parents
from slackrescale.model import HierarchicalTask
from slackrescale.oracles import ChainInstance

rng = np.random.default_rng(0)
chain = ChainInstance(rng.normal(size=(6, 3)), rng.normal(size=(3, 3)), (0, 1, 2, 2, 1, 0))
full = chain.enumerate()
print(f"chain of 6 positions, 3 tags: {full.size} sequences")
for lam in (0.1, 1.0, 10.0):
    a = chain.lambda_oracle(lam)
    print(f"  lam={lam:5.1f}  viterbi {a.label}  (h, g)=({a.point.h:.3f}, {a.point.g:.0f})  "
          f"matches enumeration: {a.label == full.lambda_oracle(lam).label}")
print("  bisecting on viterbi:", run_search("bisecting", chain).best_phi,
      " angular on enumeration:", run_search("angular", full).best_phi)

parents = load_parents(fixture_path("hierarchy.parents"))
ds = load_multilabel(fixture_path("hierarchy.svm"), d_labels=len(parents))
task = HierarchicalTask(ds.d_features, parents)
model, _ = sgd_train(ModelState.zeros(task, 1e-2), ds.examples("train"), "angular", epochs=20, seed=0)
r = evaluate(model, ds, "test")
print(f"\nlabel forest {parents}")
print(f"  test acc={r.acc:.3f} label_loss={r.label_loss:.3f}")
preds = [model.predict(x) for x in ds.subset("test").X]
print("  every prediction respects the forest:", all(task.is_valid(p) for p in preds))
