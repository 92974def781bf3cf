"""Maximisation of ``h(y) * g(y)`` through margin-rescaling oracles.

Four searches are provided:

``sarawagi_search``
    golden-section minimisation of ``max_y h + lam*g - 2 sqrt(xi*lam)``;
``binary_search_upper``
    golden-section minimisation of the slack-free convex bound
    ``max_y (h/lam + lam*g)**2 / 4``;
``bisecting_search``
    interval bisection on ``lam`` driven by the monotonicity of ``h(y_lam)``
    and ``g(y_lam)``;
``angular_search``
    exact branch-and-bound over slope wedges using the constrained oracle.

The first three only use the unconstrained oracle and so cannot be exact in
general; only angular search can return an ``Exact`` certificate for a
non-trivial instance.
"""
from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .geometry import (
    SLOPE_INF,
    LabelPoint,
    NONNEGATIVE,
    capacity,
    feasible_segments,
    is_tangent,
    lambda_score,
    lambda_value_bound,
    mirror_point,
    phi,
    slope,
    subopt_bound,
)
from .oracles import (
    EnumerationInstance,
    OracleAnswer,
    OracleQuery,
    ProblemInstance,
    StrictSide,
    UnsupportedConstraint,
)

PROBE_LO = 1e-8
PROBE_HI = 1e8
WEDGE_FLOOR_RTOL = 1e-12


@dataclass(frozen=True)
class Certificate:
    kind: str  # "exact", "bound_gap" or "heuristic"
    ratio: float | None = None

    @classmethod
    def exact(cls) -> Certificate:
        return cls("exact", 1.0)

    @classmethod
    def bound_gap(cls, ratio: float) -> Certificate:
        return cls("bound_gap", max(1.0, ratio))

    @classmethod
    def heuristic(cls) -> Certificate:
        return cls("heuristic", None)

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"


@dataclass
class SearchConfig:
    """Knobs shared by all searches.

    ``lambda0`` is the oracle weight of the first query; when ``None`` it is
    set to ``H_hat / G_hat``, probing the oracle at tiny and huge weights for
    whichever of the two is missing.  ``root`` selects the initial wedge of
    angular search: ``"full"`` is the whole positive quadrant, ``"bounded"``
    restricts slopes to ``[phi_floor / H_hat**2, G_hat**2 / phi_floor]``.
    """

    lambda0: float | None = None
    phi_floor: float | None = None
    H_hat: float | None = None
    G_hat: float | None = None
    max_queries: int = 1000
    stop_ratio: float = 0.999
    epsilon_viol: float = 0.0
    root: str = "full"
    queue: str = "priority"
    lam_range: tuple[float, float] = (1e-6, 1e6)
    golden_rtol: float = 1e-4
    bisect_rtol: float = 1e-9
    trace: bool = False

    def __post_init__(self):
        if not 0.0 < self.stop_ratio <= 1.0:
            raise ValueError(f"stop_ratio must lie in (0, 1], got {self.stop_ratio}")
        if self.max_queries < 1:
            raise ValueError("max_queries must be >= 1")
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.root not in ("full", "bounded"):
            raise ValueError(f"unknown root wedge {self.root!r}")
        if self.queue not in ("priority", "fifo"):
            raise ValueError(f"unknown queue discipline {self.queue!r}")


@dataclass
class SearchOutcome:
    best_label: object
    best_point: LabelPoint | None
    best_phi: float
    queries: int
    certificate: Certificate
    trace: list[dict] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.best_label is not None


@dataclass(order=False)
class Angle:
    alpha: float
    beta: float
    strict_side: StrictSide
    upper_bound: float = math.inf
    depth: int = 0

    @property
    def is_root(self) -> bool:
        return self.beta == 0.0 or math.isinf(self.alpha)

    def query_lambda(self, lambda0: float) -> float:
        if self.is_root:
            return lambda0
        return 1.0 / math.sqrt(self.alpha * self.beta)

    @property
    def exhausted(self) -> bool:
        if self.is_root:
            return False
        return self.alpha - self.beta <= WEDGE_FLOOR_RTOL * self.alpha


class _BudgetExhausted(Exception):
    pass


class _Session:
    """Per-search mutable state: query counter, incumbent and trace."""

    def __init__(self, inst: ProblemInstance, cfg: SearchConfig):
        self.inst = inst
        self.cfg = cfg
        self.queries = 0
        self.constrained_queries = 0
        self.best: OracleAnswer | None = None
        self.best_phi = 0.0
        self.trace: list[dict] = []

    def _charge(self):
        if self.queries >= self.cfg.max_queries:
            raise _BudgetExhausted
        self.queries += 1

    def oracle(self, lam: float) -> OracleAnswer:
        self._charge()
        ans = self.inst.lambda_oracle(lam)
        self.offer(ans)
        return ans

    def constrained(self, q: OracleQuery) -> OracleAnswer:
        self._charge()
        self.constrained_queries += 1
        ans = self.inst.constrained_oracle(q)
        self.offer(ans)
        return ans

    def offer(self, ans: OracleAnswer):
        if ans.empty:
            return
        v = phi(ans.point)
        if v > self.best_phi:
            self.best, self.best_phi = ans, v

    def log(self, **rec):
        if self.cfg.trace:
            rec.setdefault("t", self.queries)
            rec.setdefault("phi_hat", self.best_phi)
            self.trace.append(rec)

    def outcome(self, certificate: Certificate, **info) -> SearchOutcome:
        best = self.best
        info.setdefault("constrained_queries", self.constrained_queries)
        return SearchOutcome(
            best_label=None if best is None else best.label,
            best_point=None if best is None else best.point,
            best_phi=self.best_phi,
            queries=self.queries,
            certificate=certificate,
            trace=self.trace,
            info=info,
        )


def _gap(bound: float, phi_hat: float) -> float:
    if phi_hat <= 0.0:
        return 1.0 if bound <= 0.0 else math.inf
    return max(1.0, bound / phi_hat)


def _initial_lambda(s: _Session) -> float:
    cfg = s.cfg
    if cfg.lambda0 is not None:
        return cfg.lambda0
    H, G = cfg.H_hat, cfg.G_hat
    if H is None:
        H = s.oracle(PROBE_LO).point.h
    if G is None:
        G = s.oracle(PROBE_HI).point.g
    if H > 0 and G > 0:
        return H / G
    return 1.0


def _golden_min(f: Callable[[float], float], lo: float, hi: float, tol: float):
    """Golden-section minimisation of a unimodal ``f`` on ``[lo, hi]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _log_bracket(cfg: SearchConfig) -> tuple[float, float, float]:
    lo, hi = cfg.lam_range
    return math.log(lo), math.log(hi), math.log1p(cfg.golden_rtol)


def sarawagi_search(inst: ProblemInstance, xi: float = 0.0, cfg: SearchConfig | None = None) -> SearchOutcome:
    """Golden search on the conjugate bound ``F(lam) = K(lam) - 2 sqrt(xi lam)``.

    ``xi`` is the current slack of the example.  The best product among all
    labels returned along the way is reported; no optimality claim is made.
    """
    cfg = cfg or SearchConfig()
    if xi < 0:
        raise ValueError("xi must be non-negative")
    s = _Session(inst, cfg)

    def F(t):
        lam = math.exp(t)
        ans = s.oracle(lam)
        val = lambda_score(ans.point, lam) - 2.0 * math.sqrt(xi * lam)
        s.log(lam=lam, F=val)
        return val

    lo, hi, tol = _log_bracket(cfg)
    try:
        _golden_min(F, lo, hi, tol)
    except _BudgetExhausted:
        pass
    return s.outcome(Certificate.heuristic())


def binary_search_upper(inst: ProblemInstance, cfg: SearchConfig | None = None) -> SearchOutcome:
    """Golden search on ``Fbar(lam) = max_y (h/lam + lam*g)**2 / 4``.

    ``Fbar`` is evaluated with one oracle call at weight ``lam**2``.  Its
    smallest observed value bounds the optimum from above, giving a
    ``bound_gap`` certificate.
    """
    cfg = cfg or SearchConfig()
    s = _Session(inst, cfg)
    best_bound = [math.inf]

    def Fbar(t):
        lam = math.exp(t)
        w = lam * lam
        ans = s.oracle(w)
        val = lambda_score(ans.point, w) / lam
        bound = 0.25 * max(val, 0.0) ** 2
        best_bound[0] = min(best_bound[0], bound)
        s.log(lam=lam, bound=bound)
        return bound

    lo, hi, tol = _log_bracket(cfg)
    try:
        _golden_min(Fbar, lo, hi, tol)
    except _BudgetExhausted:
        pass
    return s.outcome(Certificate.bound_gap(_gap(best_bound[0], s.best_phi)), upper_bound=best_bound[0])


def early_stop_check(lambda_lo: float, lambda_hi: float, y_lo, y_hi) -> bool:
    """Whether the oracle answer is provably constant on ``[lambda_lo, lambda_hi]``."""
    if lambda_lo > lambda_hi:
        raise ValueError("lambda_lo must not exceed lambda_hi")
    return y_lo is not None and y_lo == y_hi


def bisecting_search(inst: ProblemInstance, cfg: SearchConfig | None = None) -> SearchOutcome:
    """Bisection on the oracle weight.

    Each answer ``y'`` at weight ``lam`` narrows the ranges that can hold
    ``h(y*)`` and ``g(y*)``.  If ``h(y') >= lam*g(y')`` the optimum needs a
    weight of at least ``lam``, otherwise at most ``lam``.  The weight
    interval starts as ``[0, inf)``; while it is unbounded above the weight
    doubles instead of taking the midpoint.
    """
    cfg = cfg or SearchConfig()
    s = _Session(inst, cfg)
    H = G = NONNEGATIVE
    lo, hi = 0.0, math.inf
    y_lo = y_hi = None
    best_bound = math.inf
    try:
        lam = _initial_lambda(s)
        while True:
            ans = s.oracle(lam)
            p = ans.point
            best_bound = min(best_bound, lambda_value_bound(lambda_score(p, lam), lam))
            if p.h > 0 and p.g > 0:
                h_seg, g_seg = feasible_segments(p, lam)
                H, G = H.intersect(h_seg), G.intersect(g_seg)
            if p.h >= lam * p.g:
                lo, y_lo = lam, ans.label
            else:
                hi, y_hi = lam, ans.label
            s.log(lam=lam, lo=lo, hi=hi, bound=best_bound)
            if H.empty or G.empty:
                break
            if y_lo is not None and y_hi is not None and early_stop_check(lo, hi, y_lo, y_hi):
                break
            if math.isinf(hi):
                lam = 2.0 * lam
            else:
                if hi - lo <= cfg.bisect_rtol * hi:
                    break
                lam = 0.5 * (lo + hi)
                if lam <= 0.0:
                    break
    except _BudgetExhausted:
        pass
    return s.outcome(Certificate.bound_gap(_gap(best_bound, s.best_phi)), upper_bound=best_bound)


def angle_upper_bound(a: Angle, incumbent_info: LabelPoint | None) -> float:
    """Optimistic product inside wedge ``a`` given the label its oracle query
    (or its parent's) returned; ``+inf`` when nothing is known."""
    if incumbent_info is None or a.is_root:
        return math.inf
    return phi(incumbent_info) * subopt_bound(capacity(a.alpha, a.beta))


def split_angle(a: Angle, answer: OracleAnswer | LabelPoint, lam: float | None = None) -> tuple[Angle, Angle]:
    """Split wedge ``a`` through the geometric-mean ray of the returned label.

    With ``z`` the answer and ``z'`` its mirror at weight ``lam``, the
    children are ``[slope(R), slope(P))`` and ``(slope(Q), slope(R))`` where
    ``P``/``Q`` is the steeper/shallower of ``z, z'`` and ``R`` lies on the
    ray of slope ``1/lam``.  Both outer rays are open: nothing on them can
    beat ``z``, and ``z`` itself is never returned again.
    """
    z = answer.point if isinstance(answer, OracleAnswer) else answer
    if z is None or not (z.h > 0 and z.g > 0):
        raise ValueError("split needs a label with h > 0 and g > 0")
    if lam is None:
        if a.is_root:
            raise ValueError("the root wedge needs an explicit lambda")
        lam = a.query_lambda(0.0)
    if is_tangent(z, lam):
        raise ValueError("tangent label: the wedge is exhausted, not split")
    zm = mirror_point(z, lam)
    sz, szm = slope(z), slope(zm)
    sP, sQ = (sz, szm) if sz >= szm else (szm, sz)
    p = phi(z)
    R = LabelPoint(math.sqrt(lam * p), math.sqrt(p / lam))
    sR = min(max(slope(R), sQ), sP)
    hi = Angle(sP, sR, StrictSide.ALPHA, depth=a.depth + 1)
    lo = Angle(sR, sQ, StrictSide.BOTH, depth=a.depth + 1)
    hi.upper_bound = angle_upper_bound(hi, z)
    lo.upper_bound = angle_upper_bound(lo, z)
    return hi, lo


class _PriorityQueue:
    def __init__(self):
        self._heap = []
        self._seq = itertools.count()

    def push(self, a: Angle):
        heapq.heappush(self._heap, (-a.upper_bound, next(self._seq), a))

    def pop(self) -> Angle:
        return heapq.heappop(self._heap)[2]

    def max_bound(self) -> float:
        return -self._heap[0][0] if self._heap else 0.0

    def __len__(self):
        return len(self._heap)


class _FifoQueue:
    def __init__(self):
        self._q = deque()

    def push(self, a: Angle):
        self._q.append(a)

    def pop(self) -> Angle:
        return self._q.popleft()

    def max_bound(self) -> float:
        return max((a.upper_bound for a in self._q), default=0.0)

    def __len__(self):
        return len(self._q)


def _root_angle(s: _Session) -> tuple[Angle, float]:
    cfg = s.cfg
    if cfg.root == "full":
        lam0 = _initial_lambda(s)
        return Angle(SLOPE_INF, 0.0, StrictSide.BOTH), lam0
    H, G, floor = cfg.H_hat, cfg.G_hat, cfg.phi_floor
    if floor is None or not floor > 0:
        raise ValueError("a bounded root wedge needs phi_floor > 0")
    if H is None:
        H = s.oracle(PROBE_LO).point.h
    if G is None:
        G = s.oracle(PROBE_HI).point.g
    alpha, beta = G * G / floor, floor / (H * H)
    if alpha < beta:
        raise ValueError("phi_floor exceeds H_hat * G_hat; the wedge is empty")
    root = Angle(alpha, beta, StrictSide.BOTH)
    lam0 = cfg.lambda0 if cfg.lambda0 is not None else 1.0 / math.sqrt(alpha * beta)
    return root, lam0


def angular_search(inst: ProblemInstance, cfg: SearchConfig | None = None) -> SearchOutcome:
    """Branch-and-bound over slope wedges with the constrained oracle.

    Wedges are processed by decreasing optimistic bound (``queue="priority"``)
    or breadth first (``queue="fifo"``).  A wedge whose bound cannot beat the
    incumbent is dropped.  Running until the queue empties yields an
    ``Exact`` certificate; the ``stop_ratio`` rule or the query budget end
    the search early with a ``bound_gap`` certificate.  Wedges whose bound
    is at most ``epsilon_viol`` are not explored; if that leaves a possible
    better label unexamined the certificate is a ``bound_gap`` as well.
    """
    cfg = cfg or SearchConfig()
    if not inst.supports_constraints:
        raise UnsupportedConstraint(f"{type(inst).__name__} cannot run angular search")
    s = _Session(inst, cfg)
    queue = _PriorityQueue() if cfg.queue == "priority" else _FifoQueue()
    info: dict = {"v1": None, "lambda0": None}
    try:
        root, lam0 = _root_angle(s)
    except _BudgetExhausted:
        return s.outcome(Certificate.bound_gap(math.inf), **info)
    info["lambda0"] = lam0
    queue.push(root)
    certificate = Certificate.exact()
    skipped = 0.0  # largest bound among wedges dropped for falling under epsilon_viol
    while len(queue):
        a = queue.pop()
        if a.upper_bound <= s.best_phi:
            continue
        if a.upper_bound <= cfg.epsilon_viol:
            skipped = max(skipped, a.upper_bound)
            continue
        best_upper = max(a.upper_bound, queue.max_bound())
        if s.best_phi > 0 and s.best_phi / best_upper > cfg.stop_ratio:
            certificate = Certificate.bound_gap(best_upper / s.best_phi)
            break
        if a.exhausted:
            continue
        lam = a.query_lambda(lam0)
        q = OracleQuery(lam, a.alpha, a.beta, a.strict_side)
        try:
            ans = s.constrained(q)
        except _BudgetExhausted:
            queue.push(a)
            certificate = Certificate.bound_gap(_gap(max(a.upper_bound, queue.max_bound()), s.best_phi))
            break
        s.log(iteration=s.constrained_queries, lam=lam, alpha=a.alpha, beta=a.beta, depth=a.depth,
              bound=a.upper_bound,
              empty=ans.empty, phi=None if ans.empty else phi(ans.point))
        if ans.empty:
            continue
        z = ans.point
        if info["v1"] is None and z.h > 0 and z.g > 0:
            r = lam * slope(z)
            info["v1"] = max(r, 1.0 / r)
        if not (z.h > 0 and z.g > 0) or is_tangent(z, lam):
            continue
        for child in split_angle(a, z, lam):
            if child.upper_bound > s.best_phi:
                queue.push(child)
    if certificate.is_exact and skipped > s.best_phi:
        certificate = Certificate.bound_gap(_gap(skipped, s.best_phi))
    return s.outcome(certificate, **info)


def exhaustive_search(inst: ProblemInstance, cfg: SearchConfig | None = None) -> SearchOutcome:
    """Brute-force reference: scan every label (needs an enumerable instance)."""
    e = inst if isinstance(inst, EnumerationInstance) else inst.enumerate()
    prod = e.h * e.g
    i = int(np.argmax(prod))
    if prod[i] <= 0:
        return SearchOutcome(None, None, 0.0, e.size, Certificate.exact())
    ans = e._answer(i)
    return SearchOutcome(ans.label, ans.point, float(prod[i]), e.size, Certificate.exact())


SEARCHES = {
    "angular": angular_search,
    "bisecting": bisecting_search,
    "binary": binary_search_upper,
    "sarawagi": sarawagi_search,
    "exhaustive": exhaustive_search,
}


def run_search(name: str, inst: ProblemInstance, cfg: SearchConfig | None = None, xi: float = 0.0) -> SearchOutcome:
    """Dispatch by name; ``xi`` is only used by the Sarawagi baseline."""
    try:
        fn = SEARCHES[name]
    except KeyError:
        raise ValueError(f"unknown search {name!r}; choose from {sorted(SEARCHES)}") from None
    if name == "sarawagi":
        return fn(inst, xi, cfg)
    return fn(inst, cfg)


def with_config(cfg: SearchConfig, **changes) -> SearchConfig:
    return replace(cfg, **changes)
