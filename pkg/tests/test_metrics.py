from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score, matthews_corrcoef

import oracles
from vulguard.errors import SingleClassEvalSet
from vulguard.metrics import (
    CSV_HEADER,
    METRIC_NAMES,
    ConfusionCounts,
    ZeroEffort,
    classification_metrics,
    confusion,
    effort_at_recall,
    p_opt,
    p_opt_detail,
    pr_auc,
    rank_for_effort,
    recall_at_effort,
    report,
    roc_auc,
)
from vulguard.models import PredictionRecord


def recs(rows) -> list[PredictionRecord]:
    return [PredictionRecord(*row) for row in rows]


def random_rows(rng: random.Random, n: int, tie_heavy: bool = False):
    labels = [rng.randint(0, 1) for _ in range(n)]
    pos, neg = rng.sample(range(n), 2)
    labels[pos], labels[neg] = 1, 0
    rows = []
    for k, y in enumerate(labels):
        score = rng.randint(0, 4) / 4 if tie_heavy else rng.random()
        rows.append((f"c{k:04d}", score, y, rng.randint(0, 60)))
    if sum(r[3] for r in rows) == 0:
        rows[0] = (*rows[0][:3], 1)
    return rows


records_st = st.lists(
    st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1), st.integers(0, 1), st.integers(0, 40)),
    min_size=2,
    max_size=60,
).filter(lambda rows: {r[1] for r in rows} == {0, 1} and sum(r[2] for r in rows) > 0)


def to_records(rows):
    return recs((f"c{k:03d}", s, y, e) for k, (s, y, e) in enumerate(rows))


SEVEN = recs([
    ("a", 0.9, 1, 1), ("b", 0.8, 0, 1), ("c", 0.4, 1, 1), ("d", 0.2, 0, 1),
    ("e", 0.7, 1, 1), ("f", 0.6, 0, 1), ("g", 0.1, 0, 1),
])


def test_confusion_seven_record_example():
    assert confusion(SEVEN) == ConfusionCounts(tp=2, fp=2, tn=2, fn=1)


def test_threshold_boundary_counts_positive():
    assert confusion(recs([("a", 0.5, 1, 1)])).tp == 1
    assert confusion(recs([("a", 1.0, 1, 0)] * 3)).tp == 3


def test_mcc_hand_value():
    mcc = classification_metrics(ConfusionCounts(tp=2, fp=1, tn=3, fn=1))[4]
    assert abs(mcc - 5 / 12) <= 1e-12


def test_perfect_and_convention_cases():
    assert classification_metrics(ConfusionCounts(3, 0, 4, 0)) == (1.0, 1.0, 1.0, 1.0, 1.0)
    assert classification_metrics(ConfusionCounts(0, 0, 5, 0)) == (1.0, 0.0, 0.0, 0.0, 0.0)


def test_auc_examples():
    exact = recs([("a", 1.0, 1, 1), ("b", 0.0, 0, 1), ("c", 1.0, 1, 2)])
    assert roc_auc(exact) == 1.0 and pr_auc(exact) == 1.0
    assert roc_auc(recs([("a", 0.3, 1, 1), ("b", 0.3, 0, 1), ("c", 0.3, 0, 1)])) == 0.5
    with pytest.raises(SingleClassEvalSet):
        roc_auc(recs([("a", 0.3, 1, 1)]))


def test_thousand_random_sets_against_oracles():
    rng = random.Random(20240501)
    for trial in range(1000):
        rows = random_rows(rng, rng.randint(2, 200), tie_heavy=trial % 3 == 0)
        r = recs(rows)
        scores, labels = [x[1] for x in rows], [x[2] for x in rows]
        assert abs(roc_auc(r) - oracles.brute_force_auc(scores, labels)) <= 1e-9
        assert abs(p_opt(r) - oracles.popt_oracle(rows)) <= 1e-9
        if trial % 10 == 0:
            assert abs(pr_auc(r) - average_precision_score(labels, scores)) <= 1e-9
            c = confusion(r)
            pred = [int(s >= 0.5) for s in scores]
            assert abs(classification_metrics(c)[4] - matthews_corrcoef(labels, pred)) <= 1e-9


def test_recall_at_effort_examples():
    single = recs([("p", 0.9, 1, 1)] + [(f"n{k}", 0.1, 0, 0) for k in range(9)])
    # the lone positive carries all the effort and crosses a 20% budget, so it is excluded
    assert recall_at_effort(single) == 0.0
    assert recall_at_effort(single, 1.0) == 1.0
    rows = random_rows(random.Random(3), 40)
    assert recall_at_effort(recs(rows), 1.0) == 1.0
    with pytest.raises(ZeroEffort):
        recall_at_effort(recs([("a", 0.5, 1, 0), ("b", 0.5, 0, 0)]))


def test_effort_at_recall_block_construction():
    rows = [(f"p{k}", 0.99, 1, 1) for k in range(5)] + [(f"n{k}", 0.01, 0, 9) for k in range(5)]
    assert effort_at_recall(recs(rows), 1.0) == pytest.approx(0.10)
    assert effort_at_recall(recs(rows), 0.0) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_effort_metrics_match_simulation_on_seeded_fixtures(seed):
    rows = random_rows(random.Random(seed), 20)
    for budget in (0.05, 0.2, 0.5, 0.8):
        assert recall_at_effort(recs(rows), budget) == oracles.recall_at_effort_oracle(rows, budget)
        assert effort_at_recall(recs(rows), budget) == oracles.effort_at_recall_oracle(rows, budget)


def test_p_opt_optimal_and_worst_orders():
    # density ranking agrees with the optimal order
    best = recs([("a", 0.9, 1, 1), ("b", 0.8, 1, 2), ("c", 0.2, 0, 5), ("d", 0.1, 0, 5)])
    assert p_opt(best) == pytest.approx(1.0, abs=1e-12)
    # negatives first, then positives by descending effort
    worst = recs([("a", 0.9, 0, 1), ("b", 0.8, 0, 1), ("c", 0.2, 1, 5), ("d", 0.01, 1, 1)])
    assert [r.commit_id for r in rank_for_effort(worst)] == ["a", "b", "c", "d"]
    assert p_opt(worst) == pytest.approx(0.0, abs=1e-12)


def test_p_opt_degenerate_curve():
    same = recs([("a", 0.5, 1, 3), ("b", 0.5, 1, 3)])
    assert p_opt_detail(same) == (1.0, True)
    assert "p_opt_degenerate_curve" in report(same).flags


@pytest.mark.parametrize("seed", range(5))
def test_p_opt_fifteen_record_fixture(seed):
    rows = random_rows(random.Random(100 + seed), 15)
    assert abs(p_opt(recs(rows)) - oracles.popt_oracle(rows)) <= 1e-9


@settings(max_examples=150, deadline=None)
@given(records_st)
def test_ranges(rows):
    rep = report(to_records(rows))
    for name in METRIC_NAMES:
        value = getattr(rep, name)
        assert math.isfinite(value)
        assert (-1.0 if name == "mcc" else 0.0) <= value <= 1.0 + 1e-12, name


@settings(max_examples=100, deadline=None)
@given(records_st, st.sampled_from(["cube", "exp", "affine"]))
def test_roc_auc_monotone_invariance(rows, transform):
    r = to_records(rows)
    fn = {"cube": lambda s: s**3, "exp": lambda s: (math.exp(s) - 1) / (math.e - 1), "affine": lambda s: 0.2 + 0.5 * s}
    moved = [PredictionRecord(x.commit_id, fn[transform](x.score), x.label, x.effort) for x in r]
    # exact only when the transform keeps distinct scores distinct
    if len({x.score for x in moved}) == len({x.score for x in r}):
        assert roc_auc(moved) == pytest.approx(roc_auc(r), abs=1e-12)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_mcc_label_flip_symmetry(tp, fp, tn, fn):
    a = classification_metrics(ConfusionCounts(tp, fp, tn, fn))[4]
    b = classification_metrics(ConfusionCounts(tn, fn, tp, fp))[4]
    assert a == pytest.approx(b, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(records_st, st.lists(st.floats(0, 1), min_size=2, max_size=6))
def test_effort_metrics_monotone(rows, levels):
    r = to_records(rows)
    levels = sorted(levels)
    rec = [recall_at_effort(r, b) for b in levels]
    eff = [effort_at_recall(r, t) for t in levels]
    assert rec == sorted(rec) and eff == sorted(eff)


def test_perfect_report():
    perfect = recs([("a", 1.0, 1, 1), ("b", 0.0, 0, 5), ("c", 1.0, 1, 2), ("d", 0.0, 0, 4)])
    rep = report(perfect)
    assert (rep.accuracy, rep.precision, rep.recall, rep.f1, rep.mcc) == (1.0,) * 5
    assert (rep.roc_auc, rep.pr_auc, rep.p_opt) == (1.0, 1.0, 1.0)
    assert report(perfect) == rep


def test_report_is_composition():
    rows = random_rows(random.Random(77), 30)
    r = recs(rows)
    rep = report(r, threshold=0.4)
    assert (rep.accuracy, rep.precision, rep.recall, rep.f1, rep.mcc) == classification_metrics(confusion(r, 0.4))
    assert rep.roc_auc == roc_auc(r) and rep.pr_auc == pr_auc(r)
    assert rep.recall_at_20_effort == recall_at_effort(r, 0.2)
    assert rep.effort_at_20_recall == effort_at_recall(r, 0.2)
    assert rep.p_opt == p_opt(r) and rep.threshold == 0.4 and rep.n == 30
    assert set(METRIC_NAMES) <= set(rep.to_json())
    assert CSV_HEADER.count(",") == rep.csv_row("lr", "demo").count(",")


def test_report_flags_undefined_values():
    rep = report(recs([("a", 0.9, 0, 0), ("b", 0.1, 0, 0)]))
    assert rep.roc_auc == 0.0 and any(f.startswith("roc_auc_undefined") for f in rep.flags)
    assert any(f.startswith("p_opt_undefined") for f in rep.flags)


def test_score_ranking_option():
    r = recs([("a", 0.9, 1, 100), ("b", 0.5, 0, 1)])
    assert [x.commit_id for x in rank_for_effort(r, "density")] == ["b", "a"]
    assert [x.commit_id for x in rank_for_effort(r, "score")] == ["a", "b"]
    with pytest.raises(ValueError):
        rank_for_effort(r, "random")
    assert np.isfinite(p_opt(r, "score"))
