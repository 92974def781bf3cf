"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``python3 -m pytest tests/test_acceptance.py -s``; the lines are
also collected in the terminal summary.
"""
import itertools
import math
import time

import numpy as np

from slackrescale.data import adversarial_instance, fixture_path, load_multilabel, planted_multilabel, random_instance
from slackrescale.metrics import evaluate
from slackrescale.model import ChainTask, ModelState, MultiLabelTask, TrainingExample
from slackrescale.oracles import ChainInstance, MultiLabelInstance
from slackrescale.search import SearchConfig, angular_search, exhaustive_search, run_search
from slackrescale.training import (
    SearchStrategy,
    cutting_plane_train,
    sgd_train,
    slack_direction,
    slack_term,
)

DISTS = ("uniform", "gaussian", "lognormal")


def exactness_ensemble():
    rng = np.random.default_rng(2024)
    for k in range(500):
        M = int(rng.integers(3, 501))
        yield random_instance(M, DISTS[k % 3], seed=10_000 + k)


def brute(inst):
    return max(0.0, float(np.max(inst.h * inst.g)))


def test_criterion_1_angular_exactness(report):
    t0 = time.perf_counter()
    wrong = over = 0
    worst = 0.0
    for inst in exactness_ensemble():
        o = angular_search(inst, SearchConfig(stop_ratio=1.0))
        star = brute(inst)
        if not (o.certificate.is_exact and abs(o.best_phi - star) <= 1e-9 * star):
            wrong += 1
        cq = o.info["constrained_queries"]
        worst = max(worst, cq / (2 * inst.size + 1))
        over += cq > 2 * inst.size + 1
    dt = time.perf_counter() - t0
    ok = wrong == 0 and over == 0
    report(1, ok, f"500 instances, {wrong} inexact, {over} over 2M+1 queries "
                  f"(max used/(2M+1)={worst:.3f}), {dt:.1f}s")
    assert ok


def test_criterion_2_anytime_bound(report):
    checks = violations = 0
    for queue in ("fifo", "priority"):
        for inst in exactness_ensemble():
            star = brute(inst)
            o = angular_search(inst, SearchConfig(stop_ratio=1.0, queue=queue, trace=True))
            v1 = o.info["v1"]
            for rec in o.trace:
                if "iteration" not in rec:
                    continue
                t, phi_hat = rec["iteration"], rec["phi_hat"]
                checks += 1
                bound = v1 ** (4.0 / (t + 1)) if v1 is not None else math.inf
                if phi_hat <= 0 or star / phi_hat > bound * (1 + 1e-12):
                    violations += 1
    ok = violations == 0 and checks > 0
    report(2, ok, f"{checks} iterations checked over fifo and priority queues, {violations} violations")
    assert ok


def test_criterion_3_separation(report):
    inst = adversarial_instance(1e-3, 1, 1)
    vals = {n: run_search(n, inst).best_phi for n in ("sarawagi", "binary", "bisecting", "angular")}
    ok = all(vals[n] <= 3e-3 for n in ("sarawagi", "binary", "bisecting")) and vals["angular"] == 0.25
    report(3, ok, ", ".join(f"{n}={v:.4g}" for n, v in vals.items()))
    assert ok


def bound_instances():
    rng = np.random.default_rng(77)
    for k in range(100):
        M = int(rng.integers(2, 300))
        h = rng.normal(0.5, 1.0, M)
        g = rng.uniform(0, 2, M)
        yield h, g, np.exp(rng.uniform(-6, 6, 50))


def test_criterion_4_bounds(report):
    checks = fails = 0
    for h, g, lams in bound_instances():
        star = max(0.0, float(np.max(h * g)))
        for lam in lams:
            fbar = 0.25 * max(0.0, float(np.max(h / lam + lam * g))) ** 2
            K = float(np.max(h + lam * g))
            kb = K * K / (4 * lam)
            checks += 2
            fails += star > fbar * (1 + 1e-12)
            fails += star > kb * (1 + 1e-12)
    ok = fails == 0 and checks == 10_000
    report(4, ok, f"{checks // 2} (instance, lambda) pairs x 2 bounds, {fails} failures")
    assert ok


def test_criterion_5_monotonicity(report):
    rng = np.random.default_rng(5)
    pairs = violations = 0
    for k in range(100):
        inst = random_instance(int(rng.integers(2, 300)), DISTS[k % 3], seed=500 + k)
        lams = np.sort(np.exp(rng.uniform(-8, 8, 50)))
        pts = [inst.lambda_oracle(float(lam)).point for lam in lams]
        for a, b in zip(pts, pts[1:]):
            pairs += 1
            violations += (b.h > a.h) or (b.g < a.g)
    ok = violations == 0
    report(5, ok, f"{pairs} consecutive pairs, {violations} violations")
    assert ok


def test_criterion_6_query_ordering(report):
    names = ("angular", "bisecting", "sarawagi")
    queries = {n: 0 for n in names}
    exact = {n: 0 for n in names}
    n_inst = 400
    cfg = SearchConfig(stop_ratio=1.0)  # exact mode: angular only stops on a certified optimum
    for k in range(n_inst):
        inst = random_instance(100, "uniform", seed=90_000 + k)
        star = exhaustive_search(inst).best_phi
        for n in names:
            o = run_search(n, inst, cfg)
            queries[n] += o.queries
            exact[n] += o.best_phi >= star * (1 - 1e-9)
    mq = {n: queries[n] / n_inst for n in names}
    er = {n: exact[n] / n_inst for n in names}
    ok = (mq["angular"] < mq["bisecting"] < mq["sarawagi"]
          and all(er["angular"] >= er[n] for n in names))
    report(6, ok, f"{n_inst * len(names)} searches; mean queries "
                  + ", ".join(f"{n}={mq[n]:.2f}" for n in names)
                  + "; exact rate " + ", ".join(f"{n}={er[n]:.3f}" for n in names))
    assert ok


def test_criterion_7_training(report):
    ds = planted_multilabel(200, 6, 8, seed=0, margin=1.0)
    data = ds.examples()
    task = MultiLabelTask(ds.d_features, 8)
    model, hist = sgd_train(ModelState.zeros(task, 1e-4), data, "angular", epochs=200, seed=0,
                            track_objective=False)
    sgd_slack = sum(slack_term(model, ex) for ex in data)
    zero_epoch = next((h["epoch"] for h in hist if h["active"] == 0), None)
    cp_model, _, cp_hist = cutting_plane_train(ModelState.zeros(task, 1e-4), data, "angular",
                                               eps=1e-3, max_rounds=100)
    terminated = cp_hist[-1]["added"] == 0
    xi_max = max(slack_term(cp_model, ex) for ex in data)

    fx = load_multilabel(fixture_path("yeast_style.svm"))
    train = fx.examples("train")
    fixture_task = MultiLabelTask(fx.d_features, fx.d_labels)
    reports = {}
    curve = None
    for mode in ("slack", "margin"):
        m, h = sgd_train(ModelState.zeros(fixture_task, 1e-2), train, SearchStrategy("angular"),
                         epochs=15, mode=mode, seed=0)
        reports[mode] = evaluate(m, fx, "test")
        if mode == "slack":
            curve = np.array([r["objective"] for r in h])
    mov = np.array([np.median(curve[i:i + 5]) for i in range(len(curve) - 4)])
    mono = bool(np.all(np.diff(mov) <= 0))
    ok = sgd_slack == 0.0 and terminated and xi_max <= 1e-6 and len(reports) == 2 and mono
    report(7, ok, f"sgd training slack={sgd_slack:.3g} (first clean epoch {zero_epoch}), "
                  f"cutting-plane max xi={xi_max:.2g}; fixture acc slack={reports['slack'].acc:.3f} "
                  f"margin={reports['margin'].acc:.3f}; 5-epoch moving median non-increasing={mono}")
    assert ok


def test_criterion_8_oracle_equivalence(report):
    rng = np.random.default_rng(8)
    ml_bad = chain_bad = 0
    for _ in range(200):
        d = int(rng.integers(1, 9))
        inst = MultiLabelInstance(rng.normal(size=d), rng.integers(0, 2, d))
        lam = float(np.exp(rng.uniform(-4, 4)))
        a, b = inst.lambda_oracle(lam), inst.enumerate().lambda_oracle(lam)
        ml_bad += a.label != b.label or not np.allclose(a.point, b.point, rtol=1e-12, atol=1e-12)
    for _ in range(200):
        T, k = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        inst = ChainInstance(rng.normal(size=(T, k)), rng.normal(size=(k, k)),
                             tuple(int(c) for c in rng.integers(0, k, T)))
        lam = float(np.exp(rng.uniform(-4, 4)))
        a, b = inst.lambda_oracle(lam), inst.enumerate().lambda_oracle(lam)
        chain_bad += a.label != b.label or not np.allclose(a.point, b.point, rtol=1e-12, atol=1e-12)
    ok = ml_bad == 0 and chain_bad == 0
    report(8, ok, f"multi-label 200 probes, {ml_bad} mismatches; chain 200 probes, {chain_bad} mismatches")
    assert ok


def slack_max_term(model, ex, labels):
    gold = model.score(ex.x, ex.y_gold)
    vals = [model.task.loss(y, ex.y_gold) * (1 + model.score(ex.x, y) - gold) for y in labels]
    return np.array(vals)


def test_criterion_9_finite_differences(report):
    rng = np.random.default_rng(9)
    probes = fails = skipped = 0
    worst = 0.0
    while probes < 100:
        if probes % 2 == 0:
            task = MultiLabelTask(3, 3)
            gold = tuple(int(b) for b in rng.integers(0, 2, 3))
        else:
            task = ChainTask(3, 2)
            gold = tuple(int(c) for c in rng.integers(0, 2, 3))
        model = ModelState(rng.normal(size=task.dim), 0.1, task)
        ex = TrainingExample(rng.normal(size=(3, 3)) if isinstance(task, ChainTask) else rng.normal(size=3), gold)
        labels = list(itertools.product(range(2), repeat=3))  # 3 bits or 3 binary tags
        vals = np.sort(slack_max_term(model, ex, labels))
        if vals[-1] <= 0 or vals[-1] - vals[-2] < 1e-3:
            skipped += 1
            continue
        d, _ = slack_direction(model, ex, "angular")
        u = rng.normal(size=model.w.size)
        u /= np.linalg.norm(u)
        eps = 1e-6

        def F(w):
            return float(np.max(slack_max_term(ModelState(w, model.C, task), ex, labels)))

        fd = (F(model.w + eps * u) - F(model.w - eps * u)) / (2 * eps)
        an = float(d @ u)
        err = abs(fd - an) / max(abs(an), 1e-8)
        worst = max(worst, err)
        fails += not math.isclose(fd, an, rel_tol=1e-5, abs_tol=1e-8)
        probes += 1
    ok = fails == 0
    report(9, ok, f"{probes} probes ({skipped} near-tie or inactive draws skipped), {fails} failures, "
                  f"max rel err {worst:.2g}")
    assert ok
