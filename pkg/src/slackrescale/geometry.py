"""Planar geometry of labels.

Every label ``y`` of a single training example is represented by the point
``(h(y), g(y))`` where ``h = 1 + f(y) - f(y_gold)`` is the margin violation
and ``g = L(y, y_gold) >= 0`` is the task error.  The slack-rescaled
violation is the product ``h * g``; the oracles only ever maximise linear
scores ``h + lam * g``.  All functions here are pure and work on floats.
"""
from __future__ import annotations

import math
from typing import NamedTuple

# Slopes live in the extended interval [0, +inf]; these are the explicit ends.
SLOPE_ZERO = 0.0
SLOPE_INF = math.inf

TANGENCY_RTOL = 1e-9


class LabelPoint(NamedTuple):
    h: float
    g: float


class Segment(NamedTuple):
    """Closed interval ``[lo, hi]``; empty when ``lo > hi``."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def intersect(self, other: Segment) -> Segment:
        return Segment(max(self.lo, other.lo), min(self.hi, other.hi))

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


EMPTY_SEGMENT = Segment(math.inf, -math.inf)
NONNEGATIVE = Segment(0.0, math.inf)


def phi(p: LabelPoint) -> float:
    return p.h * p.g


def lambda_score(p: LabelPoint, lam: float) -> float:
    return p.h + lam * p.g


def slope(p: LabelPoint) -> float:
    """Ratio ``g / h``; labels with ``h <= 0`` sit on the vertical ray (+inf)."""
    if p.h <= 0.0:
        return SLOPE_INF
    return p.g / p.h


def mirror_point(p: LabelPoint, lam: float) -> LabelPoint:
    """Second intersection of the line ``h + lam*g = const`` with the hyperbola
    ``h*g = const`` through ``p``.  Both scores are preserved."""
    return LabelPoint(lam * p.g, p.h / lam)


def is_tangent(p: LabelPoint, lam: float, rtol: float = TANGENCY_RTOL) -> bool:
    """True when ``p`` and its mirror coincide (``h == lam * g``) up to ``rtol``."""
    a, b = p.h, lam * p.g
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def feasible_segments(p: LabelPoint, lam: float) -> tuple[Segment, Segment]:
    """Ranges that must contain ``h(y*)`` and ``g(y*)`` once ``p`` is known to
    maximise ``h + lam*g``."""
    z = mirror_point(p, lam)
    h_seg = Segment(min(p.h, z.h), max(p.h, z.h))
    g_seg = Segment(min(p.g, z.g), max(p.g, z.g))
    return h_seg, g_seg


def lambda_value_bound(K: float, lam: float) -> float:
    """Upper bound ``K**2 / (4 lam)`` on the best product, where ``K`` is the
    optimal value of ``h + lam*g``."""
    return K * K / (4.0 * lam)


def capacity(alpha: float, beta: float) -> float:
    """Capacity ``sqrt(alpha / beta)`` of the slope wedge ``[beta, alpha]``."""
    if beta <= 0.0 or math.isinf(alpha):
        raise ValueError("capacity is undefined for an unbounded wedge")
    if alpha < beta:
        raise ValueError(f"alpha={alpha} < beta={beta}")
    return math.sqrt(alpha / beta)


def subopt_bound(a: float) -> float:
    """Ratio bound ``(a + 1/a)**2 / 4`` between a wedge's best product and the
    product of the label its oracle returned."""
    if a < 1.0:
        raise ValueError(f"subopt_bound needs a >= 1, got {a}")
    return 0.25 * (a + 1.0 / a) ** 2
