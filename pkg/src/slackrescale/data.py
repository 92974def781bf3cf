"""Datasets, file formats and synthetic instance generators.

Multi-label text format (``svmlight-multilabel``), one example per line::

    l1,l2,... idx:val idx:val ...   [# split=train|holdout|test]

Label and feature indices are 0-based.  An example without labels starts
directly with its first ``idx:val`` pair.  Blank lines and lines holding
only a comment are skipped.

CSV format: a header ``split,labels,f0,...,f{d-1}``; ``labels`` holds the
positive label indices joined by ``;`` and the features are dense.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .model import TrainingExample
from .oracles import EnumerationInstance

SPLITS = ("train", "holdout", "test")
FORMATS = ("svmlight-multilabel", "csv")
DISTRIBUTIONS = ("uniform", "gaussian", "lognormal")


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass
class MultiLabelDataset:
    X: np.ndarray
    Y: np.ndarray
    split: np.ndarray = None
    d_features: int = field(init=False)
    d_labels: int = field(init=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=np.int8)
        if self.X.ndim != 2 or self.Y.ndim != 2 or self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y must be 2-d with one row per example")
        if self.split is None:
            self.split = np.array(["train"] * len(self.X), dtype=object)
        self.split = np.asarray(self.split, dtype=object)
        bad = set(self.split) - set(SPLITS)
        if bad:
            raise ValueError(f"unknown split tags {sorted(bad)}")
        self.d_features = self.X.shape[1]
        self.d_labels = self.Y.shape[1]

    def __len__(self):
        return self.X.shape[0]

    def subset(self, tag: str) -> MultiLabelDataset:
        m = self.split == tag
        return MultiLabelDataset(self.X[m], self.Y[m], self.split[m])

    def examples(self, tag: str | None = None) -> list[TrainingExample]:
        idx = range(len(self)) if tag is None else np.flatnonzero(self.split == tag)
        return [TrainingExample(self.X[i], tuple(int(b) for b in self.Y[i]), int(i)) for i in idx]


def _parse_svmlight(text: str, d_features, d_labels) -> MultiLabelDataset:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body, _, comment = raw.partition("#")
        tokens = body.split()
        if not tokens:
            continue
        tag = "train"
        comment = comment.strip()
        if comment.startswith("split="):
            tag = comment[len("split="):].strip()
            if tag not in SPLITS:
                raise ParseError(lineno, f"unknown split {tag!r}")
        labels: list[int] = []
        if ":" not in tokens[0]:
            try:
                labels = [int(t) for t in tokens[0].split(",") if t]
            except ValueError:
                raise ParseError(lineno, f"bad label list {tokens[0]!r}") from None
            tokens = tokens[1:]
        feats = {}
        for tok in tokens:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"expected idx:val, got {tok!r}")
            try:
                j, v = int(idx), float(val)
            except ValueError:
                raise ParseError(lineno, f"bad feature {tok!r}") from None
            if j < 0:
                raise ParseError(lineno, f"negative feature index {j}")
            if d_features is not None and j >= d_features:
                raise ParseError(lineno, f"feature index {j} >= d_features={d_features}")
            if j in feats:
                raise ParseError(lineno, f"duplicate feature index {j}")
            feats[j] = v
        for lab in labels:
            if lab < 0:
                raise ParseError(lineno, f"negative label index {lab}")
            if d_labels is not None and lab >= d_labels:
                raise ParseError(lineno, f"label index {lab} >= d_labels={d_labels}")
        rows.append((labels, feats, tag))
    nf = d_features if d_features is not None else 1 + max((j for _, f, _ in rows for j in f), default=-1)
    nl = d_labels if d_labels is not None else 1 + max((l for ls, _, _ in rows for l in ls), default=-1)
    X = np.zeros((len(rows), nf))
    Y = np.zeros((len(rows), nl), dtype=np.int8)
    for i, (labels, feats, _) in enumerate(rows):
        for j, v in feats.items():
            X[i, j] = v
        Y[i, labels] = 1
    return MultiLabelDataset(X, Y, np.array([r[2] for r in rows], dtype=object))


def _parse_csv(text: str, d_features, d_labels) -> MultiLabelDataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return MultiLabelDataset(np.zeros((0, d_features or 0)), np.zeros((0, d_labels or 0)))
    if header[:2] != ["split", "labels"]:
        raise ParseError(1, "header must start with split,labels")
    nf = len(header) - 2
    if d_features is not None and nf != d_features:
        raise ParseError(1, f"header has {nf} features, expected {d_features}")
    X, labels, tags = [], [], []
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != nf + 2:
            raise ParseError(lineno, f"expected {nf + 2} fields, got {len(row)}")
        if row[0] not in SPLITS:
            raise ParseError(lineno, f"unknown split {row[0]!r}")
        try:
            labs = [int(t) for t in row[1].split(";") if t]
            X.append([float(v) for v in row[2:]])
        except ValueError as e:
            raise ParseError(lineno, str(e)) from None
        if any(l < 0 or (d_labels is not None and l >= d_labels) for l in labs):
            raise ParseError(lineno, f"label index out of range in {row[1]!r}")
        labels.append(labs)
        tags.append(row[0])
    nl = d_labels if d_labels is not None else 1 + max((l for ls in labels for l in ls), default=-1)
    Y = np.zeros((len(X), nl), dtype=np.int8)
    for i, labs in enumerate(labels):
        Y[i, labs] = 1
    return MultiLabelDataset(np.array(X, dtype=float).reshape(len(X), nf), Y, np.array(tags, dtype=object))


def load_multilabel(path, format: str = "svmlight-multilabel", d_features: int | None = None,
                    d_labels: int | None = None) -> MultiLabelDataset:
    """Read a dataset; dimensions are inferred when not declared."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; choose from {FORMATS}")
    text = Path(path).read_text()
    return loads_multilabel(text, format, d_features, d_labels)


def loads_multilabel(text: str, format: str = "svmlight-multilabel", d_features=None, d_labels=None):
    if format == "csv":
        return _parse_csv(text, d_features, d_labels)
    return _parse_svmlight(text, d_features, d_labels)


def dumps_multilabel(ds: MultiLabelDataset, format: str = "svmlight-multilabel") -> str:
    """Serialise ``ds``.  Zero features are dropped in the sparse format and
    floats are written with ``repr`` so that loading gives back the same
    values."""
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["split", "labels"] + [f"f{j}" for j in range(ds.d_features)])
        for x, y, tag in zip(ds.X, ds.Y, ds.split):
            w.writerow([tag, ";".join(str(j) for j in np.flatnonzero(y))] + [repr(float(v)) for v in x])
        return buf.getvalue()
    lines = []
    for x, y, tag in zip(ds.X, ds.Y, ds.split):
        parts = []
        labs = ",".join(str(j) for j in np.flatnonzero(y))
        if labs:
            parts.append(labs)
        parts += [f"{j}:{float(x[j])!r}" for j in np.flatnonzero(x)]
        line = " ".join(parts)
        if tag != "train":
            line += f" # split={tag}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


def dump_multilabel(ds: MultiLabelDataset, path, format: str = "svmlight-multilabel"):
    Path(path).write_text(dumps_multilabel(ds, format))


def load_parents(path) -> list[int]:
    """Label forest in parent-list form: one ``node parent`` pair per line,
    ``parent = -1`` for roots.  Nodes must be numbered 0..d-1."""
    pairs = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        body = raw.partition("#")[0].split()
        if not body:
            continue
        if len(body) != 2:
            raise ParseError(lineno, "expected 'node parent'")
        try:
            node, parent = int(body[0]), int(body[1])
        except ValueError:
            raise ParseError(lineno, "node and parent must be integers") from None
        pairs[node] = parent
    d = len(pairs)
    if sorted(pairs) != list(range(d)):
        raise ParseError(0, "nodes must be numbered 0..d-1")
    parents = [pairs[j] for j in range(d)]
    if any(p >= j for j, p in enumerate(parents)):
        raise ParseError(0, "every parent must precede its child")
    return parents


def fixture_path(name: str) -> Path:
    """Path of a bundled data file (``yeast_style.svm``, ``hierarchy.svm``,
    ``hierarchy.parents``)."""
    return Path(str(resources.files("slackrescale") / "data" / name))


def adversarial_instance(eps: float = 1e-3, H_hat: float = 1.0, G_hat: float = 1.0) -> EnumerationInstance:
    """Three labels ``A=(eps, G_hat)``, ``B=(H_hat, eps)``, ``C=(H_hat/2, G_hat/2)``.

    No lambda-oracle weight ever returns ``C`` although it has the largest
    product ``H_hat * G_hat / 4``.
    """
    if not 0 < eps < min(H_hat, G_hat) / 2:
        raise ValueError("need 0 < eps < min(H_hat, G_hat) / 2")
    return EnumerationInstance([eps, H_hat, H_hat / 2], [G_hat, eps, G_hat / 2], labels=["A", "B", "C"])


def random_instance(M: int, distribution: str = "uniform", seed: int = 0,
                    h_max: float = 1.0, g_max: float = 1.0) -> EnumerationInstance:
    """``M`` points with ``h`` in ``(0, h_max]`` and ``g`` in ``[0, g_max]``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        u = 1.0 - rng.random((2, M))  # (0, 1]
        h, g = u[0], 1.0 - u[1]
    elif distribution == "gaussian":
        h = np.clip(np.abs(rng.normal(0.5, 0.25, M)), 1e-12, 1.0)
        g = np.clip(np.abs(rng.normal(0.5, 0.25, M)), 0.0, 1.0)
    else:
        z = np.exp(rng.normal(0.0, 1.0, (2, M)))
        h, g = z[0] / z[0].max(), z[1] / z[1].max()
    return EnumerationInstance(h_max * h, g_max * g)


def planted_multilabel(n: int, d_features: int, d_labels: int, seed: int = 0, margin: float = 0.0,
                       flip: float = 0.0, test_fraction: float = 0.0) -> MultiLabelDataset:
    """Labels from a random linear rule ``y_j = [w_j . x > 0]``.

    Every example keeps every bit score at least ``margin`` away from zero
    (rejection sampling), so ``margin > 0`` gives linearly separable data.
    ``flip`` is the probability of flipping each label bit afterwards.  The
    last feature is a constant 1.
    """
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(d_labels, d_features))
    W[:, -1] = rng.normal(0.0, 0.5, d_labels)
    rows = []
    while len(rows) < n:
        x = rng.normal(size=d_features)
        x[-1] = 1.0
        s = W @ x
        if np.min(np.abs(s)) >= margin:
            rows.append((x, (s > 0).astype(np.int8)))
    X = np.array([r[0] for r in rows]).reshape(n, d_features)
    Y = np.array([r[1] for r in rows], dtype=np.int8).reshape(n, d_labels)
    if flip > 0:
        Y = np.where(rng.random(Y.shape) < flip, 1 - Y, Y).astype(np.int8)
    split = np.array(["train"] * n, dtype=object)
    n_test = int(round(test_fraction * n))
    if n_test:
        split[n - n_test:] = "test"
    return MultiLabelDataset(X, Y, split)


def planted_hierarchy(n: int, d_features: int, parents, seed: int = 0, flip: float = 0.0,
                      test_fraction: float = 0.0) -> MultiLabelDataset:
    """Like :func:`planted_multilabel` but labels are made ancestor-closed by
    switching off every node whose parent is off."""
    ds = planted_multilabel(n, d_features, len(parents), seed, flip=flip, test_fraction=test_fraction)
    Y = ds.Y.copy()
    for j, p in enumerate(parents):
        if p >= 0:
            Y[:, j] &= Y[:, p]
    return MultiLabelDataset(ds.X, Y, ds.split)
