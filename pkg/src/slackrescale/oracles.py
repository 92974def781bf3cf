"""Margin-rescaling oracles over a single example's label space.

A :class:`ProblemInstance` answers two kinds of query:

* the lambda-oracle, ``argmax_y h(y) + lam * g(y)``;
* the constrained lambda-oracle, the same argmax restricted to labels whose
  slope ``g/h`` lies in a wedge ``[beta, alpha]`` (see :class:`OracleQuery`).

Three backends are provided.  :class:`EnumerationInstance` scans an explicit
list of points and supports both queries.  :class:`MultiLabelInstance` and
:class:`ChainInstance` decompose over label bits / sequence positions and
answer only the unconstrained query.
"""
from __future__ import annotations

import collections.abc
import enum
import functools
import itertools
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

import numpy as np

from .geometry import SLOPE_INF, LabelPoint

LabelId = Hashable


class UnsupportedConstraint(Exception):
    """The backend cannot restrict its argmax to a slope wedge."""


class StrictSide(enum.Enum):
    """Which wedge boundaries are open.

    ``ALPHA``: ``beta <= slope < alpha``; ``BETA``: ``beta < slope <= alpha``;
    ``BOTH``: ``beta < slope < alpha``; ``NONE``: ``beta <= slope <= alpha``.
    A closed ``alpha = +inf`` admits every label, including those with
    ``h <= 0``; an open one keeps only ``h > 0``.
    """

    ALPHA = "alpha"
    BETA = "beta"
    BOTH = "both"
    NONE = "none"

    @property
    def alpha_open(self) -> bool:
        return self in (StrictSide.ALPHA, StrictSide.BOTH)

    @property
    def beta_open(self) -> bool:
        return self in (StrictSide.BETA, StrictSide.BOTH)


@dataclass(frozen=True)
class OracleQuery:
    lam: float
    alpha: float = SLOPE_INF
    beta: float = 0.0
    strict_side: StrictSide = StrictSide.ALPHA
    exclude_zero_loss: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.alpha < self.beta:
            raise ValueError(f"alpha={self.alpha} < beta={self.beta}")

    @property
    def unconstrained(self) -> bool:
        return (
            self.alpha == SLOPE_INF
            and not self.strict_side.alpha_open
            and self.beta == 0.0
            and not self.strict_side.beta_open
        )

    def admits(self, s: float) -> bool:
        """Slope-membership test matching :meth:`EnumerationInstance.constrained_oracle`."""
        a, b, side = self.alpha, self.beta, self.strict_side
        upper = s < a if side.alpha_open else s <= a
        lower = s > b if side.beta_open else s >= b
        return upper and lower


@dataclass(frozen=True)
class OracleAnswer:
    label: Any
    point: LabelPoint | None

    @property
    def empty(self) -> bool:
        return self.label is None


EMPTY_ANSWER = OracleAnswer(None, None)


class ProblemInstance:
    """Label space of one example seen through its oracles."""

    supports_constraints = False

    @property
    def size(self) -> int:
        """Number of labels ``M``."""
        raise NotImplementedError

    def lambda_oracle(self, lam: float, exclude_zero_loss: bool = False) -> OracleAnswer:
        raise NotImplementedError

    def constrained_oracle(self, query: OracleQuery) -> OracleAnswer:
        if query.unconstrained:
            return self.lambda_oracle(query.lam, query.exclude_zero_loss)
        raise UnsupportedConstraint(
            f"{type(self).__name__} cannot answer slope-constrained queries"
        )

    def point(self, label) -> LabelPoint:
        raise NotImplementedError


def lambda_oracle(inst: ProblemInstance, lam: float, exclude_zero_loss: bool = False) -> OracleAnswer:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return inst.lambda_oracle(lam, exclude_zero_loss)


def constrained_lambda_oracle(inst: ProblemInstance, q: OracleQuery) -> OracleAnswer:
    return inst.constrained_oracle(q)


class EnumerationInstance(ProblemInstance):
    """Exact reference backend: a linear scan over materialised points.

    ``labels`` optionally names each point (default: its index).  Labels must
    be listed in increasing order for the smallest-id tie rule to hold.
    """

    supports_constraints = True

    def __init__(self, h, g, labels: Sequence | None = None):
        self.h = np.ascontiguousarray(h, dtype=float)
        self.g = np.ascontiguousarray(g, dtype=float)
        if self.h.ndim != 1 or self.h.shape != self.g.shape:
            raise ValueError("h and g must be 1-d arrays of equal length")
        if self.h.size == 0:
            raise ValueError("an instance needs at least one label")
        if np.any(self.g < 0):
            raise ValueError("task error g must be non-negative")
        self.labels = labels
        self._finite = self.h > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            self.slopes = np.where(self._finite, self.g / np.where(self._finite, self.h, 1.0), np.inf)

    @property
    def size(self) -> int:
        return self.h.size

    def _answer(self, i: int) -> OracleAnswer:
        label = i if self.labels is None else self.labels[i]
        return OracleAnswer(label, LabelPoint(float(self.h[i]), float(self.g[i])))

    def index_of(self, label) -> int:
        if self.labels is None:
            return int(label)
        if isinstance(self.labels, ProductLabels):
            return self.labels.index(label)
        if not hasattr(self, "_index"):
            self._index = {lab: i for i, lab in enumerate(self.labels)}
        return self._index[label]

    def point(self, label) -> LabelPoint:
        i = self.index_of(label)
        return LabelPoint(float(self.h[i]), float(self.g[i]))

    def _argmax(self, lam: float, mask=None) -> OracleAnswer:
        score = self.h + lam * self.g
        if mask is not None:
            if not mask.any():
                return EMPTY_ANSWER
            score = np.where(mask, score, -np.inf)
        return self._answer(int(np.argmax(score)))

    def lambda_oracle(self, lam: float, exclude_zero_loss: bool = False) -> OracleAnswer:
        mask = self.g > 0 if exclude_zero_loss else None
        return self._argmax(lam, mask)

    def constrained_oracle(self, query: OracleQuery) -> OracleAnswer:
        s = self.slopes
        side = query.strict_side
        mask = np.ones(s.shape, dtype=bool)
        if query.alpha == SLOPE_INF:
            if side.alpha_open:
                mask &= self._finite
        else:
            mask &= (s < query.alpha) if side.alpha_open else (s <= query.alpha)
        if query.beta > 0.0 or side.beta_open:
            mask &= (s > query.beta) if side.beta_open else (s >= query.beta)
        if query.exclude_zero_loss:
            mask &= self.g > 0
        return self._argmax(query.lam, mask)


class ProductLabels(collections.abc.Sequence):
    """All length-``T`` tuples over ``range(k)`` in lexicographic order,
    materialised one at a time."""

    def __init__(self, k: int, T: int):
        self.k, self.T = int(k), int(T)

    def __len__(self):
        return self.k ** self.T

    def __getitem__(self, i):
        if not 0 <= i < len(self):
            raise IndexError(i)
        out = []
        for _ in range(self.T):
            i, r = divmod(i, self.k)
            out.append(r)
        return tuple(reversed(out))

    def index(self, label, *args) -> int:
        i = 0
        for c in label:
            if not 0 <= c < self.k:
                raise ValueError(f"{label!r} is not a label")
            i = i * self.k + int(c)
        return i

    @property
    def matrix(self) -> np.ndarray:
        return _product_matrix(self.k, self.T)


@functools.lru_cache(maxsize=32)
def _product_matrix(k: int, T: int) -> np.ndarray:
    m = np.array(list(itertools.product(range(k), repeat=T)), dtype=np.int8).reshape(-1, T)
    m.setflags(write=False)
    return m


def enumeration_backend(points) -> EnumerationInstance:
    """Instance from a list of ``(h, g)`` pairs (or :class:`LabelPoint`)."""
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("need at least one point")
    return EnumerationInstance(arr[:, 0], arr[:, 1])


class MultiLabelInstance(ProblemInstance):
    """Independent-bit multi-label space with Hamming error.

    ``scores[j]`` is the score contribution of switching bit ``j`` on; the
    model score of a bit vector ``y`` is ``sum_j y_j * scores[j]``.  Labels
    are tuples of 0/1.  A per-bit ``weights`` vector turns Hamming error into
    weighted Hamming error.
    """

    def __init__(self, scores, gold, weights=None):
        self.scores = np.asarray(scores, dtype=float)
        self.gold = np.asarray(gold, dtype=int)
        self.weights = np.ones_like(self.scores) if weights is None else np.asarray(weights, dtype=float)
        self.gold_score = float(self.scores @ self.gold)

    @property
    def size(self) -> int:
        return 2 ** self.scores.size

    def point(self, label) -> LabelPoint:
        y = np.asarray(label, dtype=int)
        h = 1.0 + float(self.scores @ y) - self.gold_score
        g = float(self.weights @ (y != self.gold))
        return LabelPoint(h, g)

    def lambda_oracle(self, lam: float, exclude_zero_loss: bool = False) -> OracleAnswer:
        on = self.scores + lam * self.weights * (self.gold == 0)
        off = lam * self.weights * (self.gold == 1)
        y = (on > off).astype(int)
        if exclude_zero_loss and np.array_equal(y, self.gold):
            # best label != gold flips exactly the cheapest bit
            cost = np.where(self.weights > 0, np.abs(on - off), np.inf)
            j = int(np.argmin(cost))
            y = self.gold.copy()
            y[j] = 1 - y[j]
        label = tuple(int(b) for b in y)
        return OracleAnswer(label, self.point(label))

    def enumerate(self) -> EnumerationInstance:
        labels = ProductLabels(2, self.scores.size)
        bits = labels.matrix
        h = 1.0 + bits @ self.scores - self.gold_score
        g = (bits != self.gold) @ self.weights
        return EnumerationInstance(h, g, labels=labels)


class ChainInstance(ProblemInstance):
    """Linear-chain label space with per-position Hamming error.

    ``unary`` has shape (T, k), ``pairwise`` shape (k, k); the score of a tag
    sequence is ``sum_t unary[t, y_t] + sum_t pairwise[y_{t-1}, y_t]``.
    Labels are tuples of tags; ties resolve to the lexicographically smallest
    sequence.
    """

    def __init__(self, unary, pairwise, gold):
        self.unary = np.asarray(unary, dtype=float)
        self.pairwise = np.asarray(pairwise, dtype=float)
        self.gold = tuple(int(t) for t in gold)
        if self.unary.ndim != 2 or len(self.gold) != self.unary.shape[0]:
            raise ValueError("unary must be (T, k) with T == len(gold)")
        self.gold_score = self.score(self.gold)

    @property
    def size(self) -> int:
        T, k = self.unary.shape
        return k ** T

    def score(self, seq) -> float:
        s = sum(self.unary[t, c] for t, c in enumerate(seq))
        s += sum(self.pairwise[a, b] for a, b in zip(seq[:-1], seq[1:]))
        return float(s)

    def point(self, label) -> LabelPoint:
        h = 1.0 + self.score(label) - self.gold_score
        g = float(sum(a != b for a, b in zip(label, self.gold)))
        return LabelPoint(h, g)

    def _augmented(self, lam: float) -> np.ndarray:
        T, k = self.unary.shape
        loss = np.ones((T, k))
        loss[np.arange(T), self.gold] = 0.0
        return self.unary + lam * loss

    def _suffix(self, u: np.ndarray) -> np.ndarray:
        # V[t, c]: best score of positions t.. given y_t = c
        T, k = u.shape
        V = np.empty((T, k))
        V[-1] = u[-1]
        for t in range(T - 2, -1, -1):
            V[t] = u[t] + np.max(self.pairwise + V[t + 1][None, :], axis=1)
        return V

    def _decode_from(self, V: np.ndarray, first: int) -> list[int]:
        seq = [first]
        for t in range(1, V.shape[0]):
            # argmax returns the smallest tag among ties
            seq.append(int(np.argmax(self.pairwise[seq[-1]] + V[t])))
        return seq

    def lambda_oracle(self, lam: float, exclude_zero_loss: bool = False) -> OracleAnswer:
        u = self._augmented(lam)
        V = self._suffix(u)
        seq = tuple(self._decode_from(V, int(np.argmax(V[0]))))
        if exclude_zero_loss and seq == self.gold:
            seq = self._best_non_gold(u, V)
        return OracleAnswer(seq, self.point(seq))

    def _best_non_gold(self, u: np.ndarray, V: np.ndarray) -> tuple:
        # best sequence with y_t = c, maximised over (t, c != gold_t)
        T, k = u.shape
        A = np.empty((T, k))  # prefix scores ending in state c at t
        A[0] = u[0]
        for t in range(1, T):
            A[t] = u[t] + np.max(A[t - 1][:, None] + self.pairwise, axis=0)
        best, arg = -np.inf, None
        for t in range(T):
            for c in range(k):
                if c == self.gold[t]:
                    continue
                val = A[t, c] + V[t, c] - u[t, c]
                if val > best:
                    best, arg = val, (t, c)
        t, c = arg
        # rebuild prefix backwards, suffix forwards through (t, c)
        prefix = [c]
        for s in range(t, 0, -1):
            prev = int(np.argmax(A[s - 1] + self.pairwise[:, prefix[-1]]))
            prefix.append(prev)
        prefix.reverse()
        seq = prefix[:]
        for s in range(t + 1, T):
            seq.append(int(np.argmax(self.pairwise[seq[-1]] + V[s])))
        return tuple(seq)

    def enumerate(self) -> EnumerationInstance:
        T, k = self.unary.shape
        labels = ProductLabels(k, T)
        seqs = labels.matrix.astype(int)
        score = self.unary[np.arange(T)[None, :], seqs].sum(axis=1)
        if T > 1:
            score = score + self.pairwise[seqs[:, :-1], seqs[:, 1:]].sum(axis=1)
        h = 1.0 + score - self.gold_score
        g = (seqs != np.asarray(self.gold)[None, :]).sum(axis=1).astype(float)
        return EnumerationInstance(h, g, labels=labels)


def multilabel_backend(model, example) -> MultiLabelInstance:
    """Factorised instance for an independent-bit multi-label model."""
    return model.task.factorized_instance(model.w, example)


def chain_backend(model, example) -> ChainInstance:
    """Viterbi-backed instance for a linear-chain model."""
    return model.task.factorized_instance(model.w, example)


class TreeInstance(ProblemInstance):
    """Hierarchical multi-label space: bit sets closed under ancestors.

    ``parents[j]`` is the parent of node ``j`` (``-1`` for a root) and must be
    smaller than ``j``.  A label is a 0/1 tuple in which every switched-on
    node has its parent switched on.  Scores and Hamming error are per bit as
    in :class:`MultiLabelInstance`; the oracle is a bottom-up dynamic program
    that prefers ``off`` on ties.
    """

    def __init__(self, scores, gold, parents):
        self.scores = np.asarray(scores, dtype=float)
        self.gold = np.asarray(gold, dtype=int)
        self.parents = [int(p) for p in parents]
        if any(p >= j for j, p in enumerate(self.parents)):
            raise ValueError("parents must precede their children")
        self.children = [[] for _ in self.parents]
        for j, p in enumerate(self.parents):
            if p >= 0:
                self.children[p].append(j)
        if not is_closed(self.gold, self.parents):
            raise ValueError("gold label is not closed under ancestors")
        self.gold_score = float(self.scores @ self.gold)

    @property
    def size(self) -> int:
        return len(self.enumerate().labels)

    def point(self, label) -> LabelPoint:
        y = np.asarray(label, dtype=int)
        return LabelPoint(1.0 + float(self.scores @ y) - self.gold_score, float(np.sum(y != self.gold)))

    def lambda_oracle(self, lam: float, exclude_zero_loss: bool = False) -> OracleAnswer:
        if exclude_zero_loss:
            e = self.enumerate()
            return e.lambda_oracle(lam, exclude_zero_loss=True)
        on = self.scores + lam * (self.gold == 0)
        off = lam * (self.gold == 1)
        n = len(self.parents)
        best_on = np.zeros(n)
        all_off = np.zeros(n)
        for j in range(n - 1, -1, -1):
            kids = self.children[j]
            all_off[j] = off[j] + sum(all_off[c] for c in kids)
            best_on[j] = on[j] + sum(max(best_on[c], all_off[c]) for c in kids)
        y = np.zeros(n, dtype=int)
        for j in range(n):
            p = self.parents[j]
            if (p < 0 or y[p] == 1) and best_on[j] > all_off[j]:
                y[j] = 1
        label = tuple(int(b) for b in y)
        return OracleAnswer(label, self.point(label))

    def enumerate(self) -> EnumerationInstance:
        if not hasattr(self, "_enum"):
            rows = [r for r in itertools.product((0, 1), repeat=len(self.parents)) if is_closed(r, self.parents)]
            bits = np.array(rows, dtype=int)
            h = 1.0 + bits @ self.scores - self.gold_score
            g = (bits != self.gold).sum(axis=1).astype(float)
            self._enum = EnumerationInstance(h, g, labels=[tuple(int(b) for b in r) for r in bits])
        return self._enum


def is_closed(bits, parents) -> bool:
    return all(p < 0 or bits[p] == 1 for j, p in enumerate(parents) if bits[j] == 1)
