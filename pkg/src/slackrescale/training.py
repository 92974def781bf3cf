"""Structural-SVM trainers driven by a product-maximisation search.

Two objectives are supported for every trainer:

``slack``  per-example term ``max_y L(y, y_i) * (1 + f(y) - f(y_i))``
``margin`` per-example term ``max_y L(y, y_i) + f(y) - f(y_i)``

both regularised by ``C/2 ||w||^2``.  The slack argmax is delegated to a
:class:`SearchStrategy`; the margin argmax is one lambda-oracle call at
``lam = 1``.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .model import ModelState, TrainingExample, instance_for
from .oracles import ProblemInstance
from .search import SEARCHES, SearchConfig, SearchOutcome, exhaustive_search, run_search

log = logging.getLogger(__name__)

MODES = ("slack", "margin")
EXACT_SEARCHES = ("angular", "exhaustive")


@dataclass
class SearchStrategy:
    """A named search plus its config and the oracle backend to run it on.

    ``backend="auto"`` uses the explicit enumeration for searches that need
    slope-constrained queries and the factorised oracle otherwise.
    """

    name: str = "angular"
    config: SearchConfig = field(default_factory=SearchConfig)
    backend: str = "auto"

    def __post_init__(self):
        if self.name not in SEARCHES:
            raise ValueError(f"unknown search {self.name!r}; choose from {sorted(SEARCHES)}")
        if self.backend not in ("auto", "factorized", "enumeration"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def instance(self, model: ModelState, ex: TrainingExample) -> ProblemInstance:
        backend = self.backend
        if backend == "auto":
            backend = "enumeration" if self.name in EXACT_SEARCHES else "factorized"
        return instance_for(model, ex, backend)

    def __call__(self, model: ModelState, ex: TrainingExample, xi: float = 0.0) -> SearchOutcome:
        return run_search(self.name, self.instance(model, ex), self.config, xi=xi)


def as_strategy(search) -> SearchStrategy:
    if isinstance(search, SearchStrategy):
        return search
    if isinstance(search, str):
        return SearchStrategy(search)
    raise TypeError(f"expected a SearchStrategy or search name, got {type(search).__name__}")


@dataclass
class StepInfo:
    violation: float
    queries: int
    label: object = None


def slack_direction(model: ModelState, ex: TrainingExample, search, xi: float = 0.0):
    """Subgradient of the slack term at ``model.w`` (``None`` when inactive)."""
    out = as_strategy(search)(model, ex, xi)
    info = StepInfo(out.best_phi, out.queries, out.best_label)
    if out.best_label is None or out.best_phi <= 0:
        return None, info
    task = model.task
    g = task.loss(out.best_label, ex.y_gold)
    d = g * (task.joint_feature(ex.x, out.best_label) - task.joint_feature(ex.x, ex.y_gold))
    return d, info


def margin_direction(model: ModelState, ex: TrainingExample, search=None):
    """Subgradient of the margin term; one lambda-oracle call at ``lam = 1``."""
    inst = instance_for(model, ex, "factorized")
    ans = inst.lambda_oracle(1.0)
    hinge = ans.point.h + ans.point.g - 1.0
    info = StepInfo(hinge, 1, ans.label)
    if hinge <= 0:
        return None, info
    task = model.task
    return task.joint_feature(ex.x, ans.label) - task.joint_feature(ex.x, ex.y_gold), info


def _apply(model: ModelState, direction, step: float) -> ModelState:
    if step <= 0:
        raise ValueError("step must be positive")
    w = (1.0 - step * model.C) * model.w
    if direction is not None:
        w = w - step * direction
    return ModelState(w, model.C, model.task)


def slack_subgradient_step(model: ModelState, ex: TrainingExample, search, step: float,
                           xi: float = 0.0) -> ModelState:
    d, _ = slack_direction(model, ex, search, xi)
    return _apply(model, d, step)


def margin_subgradient_step(model: ModelState, ex: TrainingExample, search, step: float) -> ModelState:
    d, _ = margin_direction(model, ex, search)
    return _apply(model, d, step)


def slack_term(model: ModelState, ex: TrainingExample) -> float:
    """Exact ``max(0, max_y L * h)`` by enumerating the label space."""
    return exhaustive_search(instance_for(model, ex, "enumeration")).best_phi


def margin_term(model: ModelState, ex: TrainingExample) -> float:
    ans = instance_for(model, ex, "factorized").lambda_oracle(1.0)
    return max(0.0, ans.point.h + ans.point.g - 1.0)


def objective(model: ModelState, data: list[TrainingExample], mode: str = "slack") -> float:
    """Regularised training objective ``C/2 ||w||^2 + mean term``."""
    term = slack_term if mode == "slack" else margin_term
    reg = 0.5 * model.C * float(model.w @ model.w)
    if not data:
        return reg
    return reg + sum(term(model, ex) for ex in data) / len(data)


def inverse_schedule(C: float, t0: float = 10.0) -> Callable[[int], float]:
    """Step sizes ``1 / (C (t + t0))`` for update counter ``t = 0, 1, ...``."""
    def step(t):
        return 1.0 / (C * (t + t0))
    return step


def sgd_train(model: ModelState, data: list[TrainingExample], search="angular", schedule=None,
              epochs: int = 10, mode: str = "slack", seed: int = 0, batch_size: int = 1,
              threads: int = 1, track_objective: bool = True):
    """Shuffled stochastic subgradient passes over ``data``.

    Within a minibatch every search runs against the same weight snapshot
    (concurrently when ``threads > 1``); the updates are then applied one
    after the other.  Returns the final model and a per-epoch history.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if batch_size < 1 or threads < 1:
        raise ValueError("batch_size and threads must be >= 1")
    strategy = as_strategy(search)
    schedule = schedule or inverse_schedule(model.C)
    rng = np.random.default_rng(seed)
    xi = {ex.id: 0.0 for ex in data}
    history: list[dict] = []
    queries = 0
    t = 0
    t_start = time.perf_counter()
    pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def direction(snapshot, ex):
        if mode == "slack":
            return slack_direction(snapshot, ex, strategy, xi[ex.id])
        return margin_direction(snapshot, ex)

    try:
        for epoch in range(1, epochs + 1):
            order = rng.permutation(len(data))
            hits = 0
            for b in range(0, len(order), batch_size):
                batch = [data[i] for i in order[b:b + batch_size]]
                snapshot = model
                if pool is not None:
                    results = list(pool.map(lambda ex: direction(snapshot, ex), batch))
                else:
                    results = [direction(snapshot, ex) for ex in batch]
                for ex, (d, info) in zip(batch, results):
                    queries += info.queries
                    xi[ex.id] = max(0.0, info.violation)
                    hits += d is not None
                    model = _apply(model, d, schedule(t))
                    t += 1
            rec = {"epoch": epoch, "queries": queries, "active": hits,
                   "time": time.perf_counter() - t_start}
            if track_objective:
                rec["objective"] = objective(model, data, mode)
            history.append(rec)
            log.debug("epoch %d: %s", epoch, rec)
    finally:
        if pool is not None:
            pool.shutdown()
    return model, history


class WorkingSet:
    """Constraints ``w . a_k >= b_k - xi_i`` grouped per example, with their
    dual variables.  Each example's duals sum to at most ``1/n``; the gap is
    held by an implicit zero constraint."""

    def __init__(self, n: int, dim: int):
        self.n = n
        self.dim = dim
        self.labels: list[list] = [[] for _ in range(n)]
        self.A = [np.zeros((0, dim)) for _ in range(n)]
        self.b = [np.zeros(0) for _ in range(n)]
        self.alpha = [np.zeros(0) for _ in range(n)]
        self.xi = np.zeros(n)

    @property
    def size(self) -> int:
        return sum(len(x) for x in self.labels)

    def add(self, i: int, label, a, b: float):
        self.labels[i].append(label)
        self.A[i] = np.vstack([self.A[i], np.asarray(a, dtype=float)[None, :]])
        self.b[i] = np.append(self.b[i], float(b))
        self.alpha[i] = np.append(self.alpha[i], 0.0)

    def weights(self, C: float) -> np.ndarray:
        w = np.zeros(self.dim)
        for Ai, ai in zip(self.A, self.alpha):
            if ai.size:
                w += ai @ Ai
        return w / C

    def is_dual_feasible(self, tol: float = 1e-12) -> bool:
        cap = 1.0 / self.n if self.n else 0.0
        return all(np.all(ai >= -tol) and ai.sum() <= cap + tol for ai in self.alpha)

    def slacks(self, w: np.ndarray) -> np.ndarray:
        return np.array([max(0.0, float(np.max(bi - Ai @ w))) if bi.size else 0.0
                         for Ai, bi in zip(self.A, self.b)])

    def dual_objective(self, C: float) -> float:
        w = self.weights(C)
        lin = sum(float(ai @ bi) for ai, bi in zip(self.alpha, self.b))
        return lin - 0.5 * C * float(w @ w)

    def primal_objective(self, C: float) -> float:
        if not self.n:
            return 0.0
        w = self.weights(C)
        return 0.5 * C * float(w @ w) + float(np.mean(self.slacks(w)))


def solve_working_set(ws: WorkingSet, C: float, tol: float = 1e-8, max_steps: int = 1_000_000) -> np.ndarray:
    """Dual ascent over the working set by pairwise (SMO-style) updates.

    Each step picks the example block with the widest spread between the
    largest dual gradient ``b_k - w . a_k`` and the smallest one among
    constraints holding dual mass (the implicit zero constraint, gradient 0,
    takes part on both sides), then moves mass between that pair with an
    exact line search.  Stops once every spread is at most ``tol``.
    Returns ``w``; ``ws.alpha`` and ``ws.xi`` are updated in place.
    """
    sizes = [len(bi) for bi in ws.b]
    if not sum(sizes):
        ws.xi = np.zeros(ws.n)
        return np.zeros(ws.dim)
    cap = 1.0 / ws.n
    A = np.vstack([Ai for Ai in ws.A if len(Ai)])
    b = np.concatenate(ws.b)
    alpha = np.concatenate(ws.alpha)
    block = np.repeat(np.arange(ws.n), sizes)
    Q = (A @ A.T) / C
    grad = b - Q @ alpha
    held_mass = np.bincount(block, alpha, ws.n)
    nonempty = np.flatnonzero(np.array(sizes) > 0)
    ends = np.cumsum(sizes)
    starts = ends - np.array(sizes)
    for _ in range(max_steps):
        hi = np.maximum(np.maximum.reduceat(grad, starts[nonempty]), 0.0)
        masked = np.where(alpha > 0, grad, np.inf)
        lo = np.minimum.reduceat(masked, starts[nonempty])
        lo = np.where(held_mass[nonempty] < cap, np.minimum(lo, 0.0), lo)
        spread = hi - lo
        j = int(np.argmax(spread))
        if not spread[j] > tol:
            break
        i = nonempty[j]
        s0, s1 = starts[i], ends[i]
        # the implicit zero constraint is index -1
        k = s0 + int(np.argmax(grad[s0:s1]))
        if grad[k] < 0.0:
            k = -1
        l = s0 + int(np.argmin(masked[s0:s1]))
        if held_mass[i] < cap and (alpha[l] <= 0 or masked[l] > 0.0):
            l = -1
        if k == l:
            break
        qkk = Q[k, k] if k >= 0 else 0.0
        qll = Q[l, l] if l >= 0 else 0.0
        qkl = Q[k, l] if k >= 0 and l >= 0 else 0.0
        curv = qkk + qll - 2.0 * qkl
        room = alpha[l] if l >= 0 else cap - held_mass[i]
        delta = room if curv <= 0 else min(room, spread[j] / curv)
        col = (Q[k] if k >= 0 else 0.0) - (Q[l] if l >= 0 else 0.0)  # Q is symmetric; rows are contiguous
        grad -= delta * col
        if k >= 0:
            alpha[k] += delta
            held_mass[i] += delta
        if l >= 0:
            alpha[l] = max(0.0, alpha[l] - delta)
            held_mass[i] -= delta
    ws.alpha = list(np.split(alpha, np.cumsum(sizes)[:-1]))
    w = ws.weights(C)
    ws.xi = ws.slacks(w)
    return w


def cutting_plane_train(model: ModelState, data: list[TrainingExample], search="angular",
                        eps: float = 1e-3, max_rounds: int = 50, mode: str = "slack",
                        qp_tol: float = 1e-8):
    """Constraint generation on the constrained (n-slack) form.

    Every round searches each example for its most violated label ``y`` and
    adds it to the working set when its violation exceeds ``xi_i + eps``;
    the dual over the working set is then re-solved.  Stops when a round adds
    nothing or after ``max_rounds``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    strategy = as_strategy(search)
    task = model.task
    ws = WorkingSet(len(data), task.dim)
    history: list[dict] = []
    if not data:
        return model, ws, history
    seen = [set() for _ in data]
    for rnd in range(1, max_rounds + 1):
        added = found = queries = 0
        t0 = time.perf_counter()
        for i, ex in enumerate(data):
            if mode == "slack":
                out = strategy(model, ex, ws.xi[i])
                label, viol, q = out.best_label, out.best_phi, out.queries
            else:
                ans = instance_for(model, ex, "factorized").lambda_oracle(1.0)
                label, viol, q = ans.label, ans.point.h + ans.point.g - 1.0, 1
            queries += q
            if label is None or viol <= ws.xi[i] + eps:
                continue
            found += 1
            if label in seen[i]:
                continue
            seen[i].add(label)
            L = task.loss(label, ex.y_gold)
            diff = task.joint_feature(ex.x, ex.y_gold) - task.joint_feature(ex.x, label)
            if mode == "slack":
                ws.add(i, label, L * diff, L)
            else:
                ws.add(i, label, diff, L)
            added += 1
        if added:
            w = solve_working_set(ws, model.C, qp_tol)
            model = ModelState(w, model.C, task)
        history.append({
            "round": rnd,
            "added": added,
            "working_set": ws.size,
            "objective": ws.primal_objective(model.C),
            "dual": ws.dual_objective(model.C),
            "success_rate": found / len(data),
            "queries_per_search": queries / len(data),
            "time": time.perf_counter() - t0,
        })
        log.debug("round %d: %s", rnd, history[-1])
        if not added:
            break
    return model, ws, history


def hinge_of_prediction(model: ModelState, ex: TrainingExample) -> float:
    """Error of the score-argmax prediction; the slack term upper-bounds it."""
    return model.task.loss(model.predict(ex.x), ex.y_gold)


def total_slack(model: ModelState, data: Iterable[TrainingExample]) -> float:
    return math.fsum(slack_term(model, ex) for ex in data)
