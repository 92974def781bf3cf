import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slackrescale.data import adversarial_instance, random_instance
from slackrescale.geometry import SLOPE_INF
from slackrescale.oracles import (
    ChainInstance,
    EnumerationInstance,
    MultiLabelInstance,
    OracleQuery,
    ProductLabels,
    StrictSide,
    TreeInstance,
    UnsupportedConstraint,
    constrained_lambda_oracle,
    enumeration_backend,
    is_closed,
    lambda_oracle,
)


# independent reference: plain Python loops over (h, g) pairs
def ref_argmax(h, g, lam, keep=None):
    best, arg = -math.inf, None
    for i, (a, b) in enumerate(zip(h, g)):
        if keep is not None and not keep(a, b):
            continue
        v = a + lam * b
        if v > best:
            best, arg = v, i
    return arg


def ref_slope(a, b):
    return math.inf if a <= 0 else b / a


def ref_admits(q, a, b):
    s = ref_slope(a, b)
    side = q.strict_side
    up = s < q.alpha if side in (StrictSide.ALPHA, StrictSide.BOTH) else s <= q.alpha
    lo = s > q.beta if side in (StrictSide.BETA, StrictSide.BOTH) else s >= q.beta
    return up and lo


def test_single_label():
    inst = enumeration_backend([(1, 1)])
    assert inst.size == 1
    for lam in (1e-3, 1, 1e3):
        assert lambda_oracle(inst, lam).label == 0


def test_adversarial_never_returns_middle_label():
    inst = adversarial_instance(1e-3, 1, 1)
    for lam in np.logspace(-6, 6, 10_000):
        assert inst.lambda_oracle(lam).label in ("A", "B")


def test_constrained_wedge_returns_middle_label():
    inst = adversarial_instance(1e-3, 1, 1)
    q = OracleQuery(1.0, alpha=1.1, beta=0.9, strict_side=StrictSide.ALPHA)
    ans = constrained_lambda_oracle(inst, q)
    assert ans.label == "C" and ans.point == (0.5, 0.5)


def test_empty_wedge():
    inst = adversarial_instance(1e-3, 1, 1)
    assert inst.constrained_oracle(OracleQuery(1.0, alpha=3.0, beta=2.0)).empty


def test_unconstrained_query_is_lambda_oracle(rng):
    for _ in range(20):
        inst = random_instance(50, seed=int(rng.integers(1 << 30)))
        for lam in (0.1, 1.0, 10.0):
            a = inst.lambda_oracle(lam)
            # all h > 0 here, so the open-alpha default query is unconstrained too
            for side in (StrictSide.NONE, StrictSide.ALPHA):
                assert inst.constrained_oracle(OracleQuery(lam, strict_side=side)) == a


def test_lambda_oracle_matches_reference(rng):
    for _ in range(200):
        M = int(rng.integers(1, 400))
        h, g = rng.normal(size=M), rng.uniform(0, 3, M)
        lam = float(np.exp(rng.uniform(-4, 4)))
        inst = EnumerationInstance(h, g)
        assert inst.lambda_oracle(lam).label == ref_argmax(h, g, lam)


def test_large_instance_matches_scan(rng):
    h, g = rng.normal(size=10_000), rng.uniform(0, 1, 10_000)
    inst = EnumerationInstance(h, g)
    assert inst.lambda_oracle(0.7).label == ref_argmax(h, g, 0.7)


def test_ties_pick_smallest_label():
    inst = EnumerationInstance([1, 2, 2, 1.5], [1, 0.5, 0.5, 0.5])
    assert inst.lambda_oracle(1.0).label == 1  # labels 1 and 2 tie at 2.5
    inst = EnumerationInstance([1, 3, 3], [0, 0, 0])
    assert inst.lambda_oracle(1.0).label == 1


def test_exclude_zero_loss():
    inst = EnumerationInstance([1, 0.5, 0.2], [0, 1, 2])
    assert inst.lambda_oracle(0.1).label == 0
    assert inst.lambda_oracle(0.1, exclude_zero_loss=True).label == 1


def test_monotonicity(rng):
    for _ in range(100):
        M = int(rng.integers(2, 200))
        inst = EnumerationInstance(rng.normal(size=M), rng.uniform(0, 2, M))
        pts = [inst.lambda_oracle(lam).point for lam in np.logspace(-3, 3, 50)]
        for p, q in zip(pts, pts[1:]):
            assert q.h <= p.h and q.g >= p.g


@given(st.floats(0.01, 100), st.floats(0, 5), st.floats(0, 5), st.sampled_from(list(StrictSide)),
       st.booleans(), st.integers(0, 2**31))
def test_constrained_feasibility(lam, b0, w, side, inf_alpha, seed):
    rng = np.random.default_rng(seed)
    M = 40
    h, g = rng.normal(0.5, 1, M), rng.uniform(0, 2, M)
    h[:3] = [0.0, -0.5, 1.0]
    g[:3] = [1.0, 0.0, 0.0]
    alpha = SLOPE_INF if inf_alpha else b0 + w
    q = OracleQuery(lam, alpha, b0, side)
    inst = EnumerationInstance(h, g)
    ans = inst.constrained_oracle(q)
    keep = lambda a, b: ref_admits(q, a, b)
    expect = ref_argmax(h, g, lam, keep)
    if expect is None:
        assert ans.empty
    else:
        assert ans.label == expect
        assert q.admits(inst.slopes[ans.label])


def test_wedge_partition(rng):
    # [r, a) and (b, r) split the open wedge (b, a) with no label lost or doubled
    for _ in range(200):
        M = 60
        inst = EnumerationInstance(rng.uniform(0.01, 1, M), rng.uniform(0, 1, M))
        b, r, a = np.sort(rng.uniform(0, 3, 3))
        inst.slopes[:3] = [b, r, a]  # put labels right on the boundaries
        parent = OracleQuery(1.0, a, b, StrictSide.BOTH)
        hi = OracleQuery(1.0, a, r, StrictSide.ALPHA)
        lo = OracleQuery(1.0, r, b, StrictSide.BOTH)
        for s in inst.slopes:
            assert parent.admits(s) == (hi.admits(s) + lo.admits(s) == 1) or not parent.admits(s)
            assert hi.admits(s) + lo.admits(s) == (1 if parent.admits(s) else 0)


def test_structured_backends_refuse_wedges():
    m = MultiLabelInstance([0.1, -0.2], [0, 1])
    with pytest.raises(UnsupportedConstraint):
        m.constrained_oracle(OracleQuery(1.0, 2.0, 1.0))
    assert m.constrained_oracle(OracleQuery(1.0, strict_side=StrictSide.NONE)) == m.lambda_oracle(1.0)
    c = ChainInstance(np.zeros((2, 2)), np.zeros((2, 2)), (0, 1))
    with pytest.raises(UnsupportedConstraint):
        c.constrained_oracle(OracleQuery(1.0, 2.0, 1.0))


def test_multilabel_matches_enumeration(rng):
    for _ in range(200):
        d = int(rng.integers(1, 9))
        gold = rng.integers(0, 2, d)
        inst = MultiLabelInstance(rng.normal(size=d), gold)
        e = inst.enumerate()
        assert e.size == 2 ** d
        lam = float(np.exp(rng.uniform(-3, 3)))
        a, b = inst.lambda_oracle(lam), e.lambda_oracle(lam)
        assert math.isclose(a.point.h + lam * a.point.g, b.point.h + lam * b.point.g, rel_tol=1e-12, abs_tol=1e-12)
        assert a.label == b.label
        ax, bx = inst.lambda_oracle(lam, True), e.lambda_oracle(lam, True)
        assert math.isclose(ax.point.h + lam * ax.point.g, bx.point.h + lam * bx.point.g, rel_tol=1e-12, abs_tol=1e-12)
        assert ax.point.g > 0


def test_multilabel_limits():
    scores = np.array([0.5, -0.3, 0.2])
    inst = MultiLabelInstance(scores, [1, 0, 1])
    assert inst.lambda_oracle(1e-12).label == (1, 0, 1)
    assert inst.lambda_oracle(1e6).point.g == 3


def test_chain_matches_enumeration(rng):
    for _ in range(200):
        T, k = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        gold = tuple(int(c) for c in rng.integers(0, k, T))
        inst = ChainInstance(rng.normal(size=(T, k)), rng.normal(size=(k, k)), gold)
        e = inst.enumerate()
        assert e.size == k ** T
        lam = float(np.exp(rng.uniform(-3, 3)))
        a, b = inst.lambda_oracle(lam), e.lambda_oracle(lam)
        assert a.label == b.label
        assert np.allclose(a.point, b.point)
        if k > 1:
            ax, bx = inst.lambda_oracle(lam, True), e.lambda_oracle(lam, True)
            assert math.isclose(ax.point.h + lam * ax.point.g, bx.point.h + lam * bx.point.g, rel_tol=1e-9)
            assert ax.point.g > 0


def test_chain_single_position_and_map(rng):
    u = rng.normal(size=(1, 4))
    inst = ChainInstance(u, rng.normal(size=(4, 4)), (2,))
    assert inst.lambda_oracle(1e-12).label == (int(np.argmax(u[0])),)
    # lam -> 0 is plain MAP decoding
    inst = ChainInstance(rng.normal(size=(4, 3)), rng.normal(size=(3, 3)), (0, 0, 0, 0))
    seqs = list(itertools.product(range(3), repeat=4))
    best = max(seqs, key=inst.score)
    assert inst.lambda_oracle(1e-12).label == best


def test_tree_matches_enumeration(rng):
    parents = [-1, 0, 0, 1, 1, 2, -1, 6]
    for _ in range(100):
        gold = rng.integers(0, 2, len(parents))
        for j, p in enumerate(parents):
            if p >= 0:
                gold[j] &= gold[p]
        inst = TreeInstance(rng.normal(size=len(parents)), gold, parents)
        e = inst.enumerate()
        assert all(is_closed(lab, parents) for lab in e.labels)
        lam = float(np.exp(rng.uniform(-3, 3)))
        a, b = inst.lambda_oracle(lam), e.lambda_oracle(lam)
        assert math.isclose(a.point.h + lam * a.point.g, b.point.h + lam * b.point.g, rel_tol=1e-12, abs_tol=1e-12)
        assert is_closed(a.label, parents)


def test_product_labels_roundtrip():
    labels = ProductLabels(3, 4)
    assert len(labels) == 81
    for i in (0, 5, 80):
        assert labels.index(labels[i]) == i
    assert list(map(tuple, labels.matrix[:3])) == [labels[0], labels[1], labels[2]]


def test_query_validation():
    with pytest.raises(ValueError):
        OracleQuery(0.0)
    with pytest.raises(ValueError):
        OracleQuery(1.0, alpha=1.0, beta=2.0)
    with pytest.raises(ValueError):
        EnumerationInstance([1.0], [-1.0])
