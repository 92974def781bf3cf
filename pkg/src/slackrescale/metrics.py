"""Multi-label evaluation metrics.

``acc``        mean Jaccard index ``|y & p| / |y | p|`` (1 when both empty)
``label_loss`` mean Hamming distance divided by the number of labels
``micro_f1``   F1 of the pooled true/false positive counts
``macro_f1``   unweighted mean of per-label F1

An F1 with no positives in either truth or prediction counts as 1.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    label_loss: float
    micro_f1: float
    macro_f1: float
    n: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 1.0)


def multilabel_metrics(Y_true, Y_pred) -> MetricsReport:
    T = np.asarray(Y_true, dtype=bool)
    P = np.asarray(Y_pred, dtype=bool)
    if T.shape != P.shape or T.ndim != 2:
        raise ValueError(f"shape mismatch: {T.shape} vs {P.shape}")
    n, d = T.shape
    if n == 0:
        return MetricsReport(1.0, 0.0, 1.0, 1.0, 0)
    inter = (T & P).sum(axis=1)
    union = (T | P).sum(axis=1)
    acc = float(np.mean(np.where(union > 0, inter / np.maximum(union, 1), 1.0)))
    label_loss = float((T != P).sum() / (n * d)) if d else 0.0
    tp = (T & P).sum(axis=0)
    fp = (~T & P).sum(axis=0)
    fn = (T & ~P).sum(axis=0)
    micro = float(_f1(tp.sum(), fp.sum(), fn.sum()))
    macro = float(np.mean(_f1(tp, fp, fn))) if d else 1.0
    return MetricsReport(acc, label_loss, micro, macro, n)


def evaluate(model, dataset, split: str | None = None) -> MetricsReport:
    """Score-argmax predictions of ``model`` on ``dataset`` (optionally one split)."""
    if model.task.d_features != dataset.d_features or model.task.d_labels != dataset.d_labels:
        raise ValueError("model and dataset dimensions differ")
    ds = dataset if split is None else dataset.subset(split)
    P = np.array([model.predict(x) for x in ds.X], dtype=np.int8).reshape(ds.Y.shape)
    return multilabel_metrics(ds.Y, P)
