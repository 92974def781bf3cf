"""Linear structured models: joint features, task error and oracle backends.

A task object knows how to build the joint feature vector ``phi(x, y)``, the
error ``L(y, y_gold)``, the score-argmax prediction, and the per-example
:class:`~slackrescale.oracles.ProblemInstance` (fast factorised form and an
explicit enumeration for exact searches).  :class:`ModelState` pairs a task
with a weight vector and regularisation constant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .oracles import (
    ChainInstance,
    EnumerationInstance,
    MultiLabelInstance,
    ProblemInstance,
    TreeInstance,
    is_closed,
)

CHECKPOINT_FORMAT = "slackrescale-model"
CHECKPOINT_VERSION = 1


@dataclass
class TrainingExample:
    x: np.ndarray
    y_gold: tuple
    id: int = 0


class MultiLabelTask:
    """Independent binary labels; ``phi(x, y) = vec(outer(y, x))``.

    ``loss_scale`` multiplies the Hamming error (used to check that the
    slack-rescaled argmax does not depend on the error scale).
    """

    kind = "multilabel"

    def __init__(self, d_features: int, d_labels: int, loss_scale: float = 1.0):
        if loss_scale <= 0:
            raise ValueError("loss_scale must be positive")
        self.d_features = int(d_features)
        self.d_labels = int(d_labels)
        self.loss_scale = float(loss_scale)

    @property
    def dim(self) -> int:
        return self.d_features * self.d_labels

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d_features": self.d_features, "d_labels": self.d_labels,
                "loss_scale": self.loss_scale}

    def joint_feature(self, x, y) -> np.ndarray:
        return np.outer(np.asarray(y, dtype=float), x).ravel()

    def loss(self, y, gold) -> float:
        return self.loss_scale * float(np.sum(np.asarray(y) != np.asarray(gold)))

    def bit_scores(self, w, x) -> np.ndarray:
        return w.reshape(self.d_labels, self.d_features) @ x

    def predict(self, w, x) -> tuple:
        return tuple(int(b) for b in self.bit_scores(w, x) > 0)

    def factorized_instance(self, w, ex: TrainingExample) -> ProblemInstance:
        weights = np.full(self.d_labels, self.loss_scale)
        return MultiLabelInstance(self.bit_scores(w, ex.x), ex.y_gold, weights)

    def enumeration_instance(self, w, ex: TrainingExample) -> EnumerationInstance:
        return self.factorized_instance(w, ex).enumerate()


class HierarchicalTask(MultiLabelTask):
    """Multi-label over a label forest: predicted sets are ancestor-closed."""

    kind = "hierarchical"

    def __init__(self, d_features: int, parents, loss_scale: float = 1.0):
        super().__init__(d_features, len(parents), loss_scale)
        if loss_scale != 1.0:
            raise ValueError("hierarchical task uses unit Hamming error")
        self.parents = [int(p) for p in parents]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d_features": self.d_features, "parents": self.parents}

    def predict(self, w, x) -> tuple:
        inst = TreeInstance(self.bit_scores(w, x), np.zeros(self.d_labels, dtype=int), self.parents)
        # at lam = 0 the oracle maximises the model score over closed sets
        return inst.lambda_oracle(0.0).label

    def factorized_instance(self, w, ex: TrainingExample) -> ProblemInstance:
        return TreeInstance(self.bit_scores(w, ex.x), ex.y_gold, self.parents)

    def is_valid(self, y) -> bool:
        return is_closed(y, self.parents)


class ChainTask:
    """Linear-chain tagging.  ``x`` is a (T, d_features) array and the weight
    vector stacks emission weights (k, d_features) and transitions (k, k)."""

    kind = "chain"

    def __init__(self, d_features: int, n_tags: int):
        self.d_features = int(d_features)
        self.n_tags = int(n_tags)

    @property
    def dim(self) -> int:
        return self.n_tags * self.d_features + self.n_tags * self.n_tags

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d_features": self.d_features, "n_tags": self.n_tags}

    def _split(self, w):
        k, d = self.n_tags, self.d_features
        return w[: k * d].reshape(k, d), w[k * d:].reshape(k, k)

    def joint_feature(self, x, y) -> np.ndarray:
        k, d = self.n_tags, self.d_features
        E = np.zeros((k, d))
        P = np.zeros((k, k))
        x = np.asarray(x, dtype=float)
        for t, tag in enumerate(y):
            E[tag] += x[t]
            if t:
                P[y[t - 1], tag] += 1.0
        return np.concatenate([E.ravel(), P.ravel()])

    def loss(self, y, gold) -> float:
        return float(sum(a != b for a, b in zip(y, gold)))

    def factorized_instance(self, w, ex: TrainingExample) -> ChainInstance:
        E, P = self._split(w)
        return ChainInstance(np.asarray(ex.x) @ E.T, P, ex.y_gold)

    def enumeration_instance(self, w, ex: TrainingExample) -> EnumerationInstance:
        return self.factorized_instance(w, ex).enumerate()

    def predict(self, w, x) -> tuple:
        T = np.asarray(x).shape[0]
        ex = TrainingExample(x, tuple([0] * T))
        return self.factorized_instance(w, ex).lambda_oracle(0.0).label


TASKS = {t.kind: t for t in (MultiLabelTask, HierarchicalTask, ChainTask)}


def task_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind not in TASKS:
        raise ValueError(f"unknown task kind {kind!r}")
    return TASKS[kind](**d)


@dataclass
class ModelState:
    w: np.ndarray
    C: float
    task: object = field(repr=False)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.w.shape != (self.task.dim,):
            raise ValueError(f"weight vector has shape {self.w.shape}, task needs ({self.task.dim},)")

    @classmethod
    def zeros(cls, task, C: float) -> ModelState:
        return cls(np.zeros(task.dim), C, task)

    @property
    def feature_map(self):
        return self.task.joint_feature

    @property
    def loss_fn(self):
        return self.task.loss

    def copy(self) -> ModelState:
        return ModelState(self.w.copy(), self.C, self.task)

    def score(self, x, y) -> float:
        return float(self.w @ self.task.joint_feature(x, y))

    def point(self, ex: TrainingExample, y):
        """``(h, g)`` of label ``y`` for example ``ex`` under the current weights."""
        h = 1.0 + self.score(ex.x, y) - self.score(ex.x, ex.y_gold)
        return h, self.task.loss(y, ex.y_gold)

    def predict(self, x) -> tuple:
        return self.task.predict(self.w, x)


def instance_for(model: ModelState, ex: TrainingExample, backend: str = "factorized") -> ProblemInstance:
    if backend == "factorized":
        return model.task.factorized_instance(model.w, ex)
    if backend == "enumeration":
        return model.task.enumeration_instance(model.w, ex)
    raise ValueError(f"unknown backend {backend!r}; choose 'factorized' or 'enumeration'")


def save_checkpoint(model: ModelState, path, extra: dict | None = None):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "C": model.C,
        "task": model.task.to_dict(),
        "w": [float(v) for v in model.w],
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> ModelState:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    return ModelState(np.array(doc["w"], dtype=float), float(doc["C"]), task_from_dict(doc["task"]))

