"""Threshold, ranking and effort-aware evaluation metrics."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import SingleClassEvalSet, VulGuardError
from .models.base import PredictionRecord

METRIC_NAMES = (
    "accuracy",
    "precision",
    "recall",
    "f1",
    "mcc",
    "roc_auc",
    "pr_auc",
    "recall_at_20_effort",
    "effort_at_20_recall",
    "p_opt",
)
RANKINGS = ("density", "score")


class ZeroEffort(VulGuardError):
    """Effort-aware metrics need a positive total effort."""


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(records: Sequence[PredictionRecord], threshold: float = 0.5) -> ConfusionCounts:
    tp = fp = tn = fn = 0
    for r in records:
        predicted = r.score >= threshold
        if r.label == 1:
            if predicted:
                tp += 1
            else:
                fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def _ratio(num: float, den: float, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(f"{name}_zero_denominator")
        return 0.0
    return num / den


def _classification(c: ConfusionCounts) -> tuple[tuple[float, float, float, float, float], list[str]]:
    flags: list[str] = []
    accuracy = _ratio(c.tp + c.tn, c.total, "accuracy", flags)
    precision = _ratio(c.tp, c.tp + c.fp, "precision", flags)
    recall = _ratio(c.tp, c.tp + c.fn, "recall", flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", flags)
    den = math.sqrt(float((c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)))
    mcc = _ratio(c.tp * c.tn - c.fp * c.fn, den, "mcc", flags)
    return (accuracy, precision, recall, f1, mcc), flags


def classification_metrics(counts: ConfusionCounts) -> tuple[float, float, float, float, float]:
    """(accuracy, precision, recall, f1, mcc); zero denominators give 0."""
    return _classification(counts)[0]


def _scores_labels(records: Sequence[PredictionRecord]) -> tuple[np.ndarray, np.ndarray]:
    s = np.array([r.score for r in records], dtype=np.float64)
    y = np.array([r.label for r in records], dtype=np.int64)
    return s, y


def _class_sizes(y: np.ndarray) -> tuple[int, int]:
    pos = int((y == 1).sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        raise SingleClassEvalSet("need at least one positive and one negative record")
    return pos, neg


def roc_auc(records: Sequence[PredictionRecord]) -> float:
    """Mann-Whitney statistic computed from average ranks."""
    s, y = _scores_labels(records)
    pos, neg = _class_sizes(y)
    ranks = rankdata(s, method="average")
    u = float(ranks[y == 1].sum()) - pos * (pos + 1) / 2.0
    return u / (pos * neg)


def pr_auc(records: Sequence[PredictionRecord]) -> float:
    """Average precision: precision summed over the recall steps of each distinct threshold."""
    s, y = _scores_labels(records)
    pos, _ = _class_sizes(y)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    seen = ends + 1
    precision = tp / seen
    recall = tp / pos
    steps = np.diff(np.r_[0.0, recall])
    return float(np.sum(steps * precision))


def rank_for_effort(records: Sequence[PredictionRecord], ranking: str = "density") -> list[PredictionRecord]:
    """Inspection order: score/(effort+1) descending, then score, then commit id."""
    if ranking == "density":
        return sorted(records, key=lambda r: (-r.score / (r.effort + 1), -r.score, r.commit_id))
    if ranking == "score":
        return sorted(records, key=lambda r: (-r.score, r.commit_id))
    raise ValueError(f"ranking must be one of {RANKINGS}")


def _total_effort(records: Sequence[PredictionRecord]) -> int:
    total = sum(r.effort for r in records)
    if total <= 0:
        raise ZeroEffort("total effort is zero")
    return total


def _positives(records: Sequence[PredictionRecord]) -> int:
    pos = sum(1 for r in records if r.label == 1)
    if pos == 0:
        raise SingleClassEvalSet("no positive records")
    return pos


def recall_at_effort(records: Sequence[PredictionRecord], budget: float = 0.20, ranking: str = "density") -> float:
    """Share of positives found before the inspected effort exceeds ``budget``."""
    total = _total_effort(records)
    pos = _positives(records)
    limit = budget * total
    spent = found = 0
    for r in rank_for_effort(records, ranking):
        if spent + r.effort > limit:
            break
        spent += r.effort
        found += r.label == 1
    return found / pos


def effort_at_recall(records: Sequence[PredictionRecord], target: float = 0.20, ranking: str = "density") -> float:
    """Share of total effort inspected until ceil(target * P) positives are found."""
    total = _total_effort(records)
    pos = _positives(records)
    # guard ceil against target*P landing a hair above an integer
    need = math.ceil(target * pos - 1e-9)
    if need <= 0:
        return 0.0
    spent = found = 0
    for r in rank_for_effort(records, ranking):
        spent += r.effort
        found += r.label == 1
        if found >= need:
            break
    return spent / total


def _curve_area(ordered: Sequence[PredictionRecord], total: int, pos: int) -> float:
    area = 0.0
    x = y = 0.0
    spent = found = 0
    for r in ordered:
        spent += r.effort
        found += r.label == 1
        nx, ny = spent / total, found / pos
        area += (nx - x) * (ny + y) / 2.0
        x, y = nx, ny
    return area


def p_opt_detail(records: Sequence[PredictionRecord], ranking: str = "density") -> tuple[float, bool]:
    """(Popt, degenerate); a degenerate curve (optimal == worst) gives 1.0."""
    total = _total_effort(records)
    pos = _positives(records)
    optimal = sorted(records, key=lambda r: (r.label != 1, r.effort, r.commit_id))
    worst = optimal[::-1]
    a_opt = _curve_area(optimal, total, pos)
    a_worst = _curve_area(worst, total, pos)
    a_model = _curve_area(rank_for_effort(records, ranking), total, pos)
    if abs(a_opt - a_worst) <= 1e-12:
        return 1.0, True
    value = 1.0 - (a_opt - a_model) / (a_opt - a_worst)
    return min(1.0, max(0.0, value)), False


def p_opt(records: Sequence[PredictionRecord], ranking: str = "density") -> float:
    return p_opt_detail(records, ranking)[0]


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    mcc: float
    roc_auc: float
    pr_auc: float
    recall_at_20_effort: float
    effort_at_20_recall: float
    p_opt: float
    threshold: float
    n: int = 0
    flags: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        row = asdict(self)
        row["flags"] = list(self.flags)
        return row

    def csv_row(self, model: str = "", project: str = "") -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([project, model, *(f"{getattr(self, m):.6f}" for m in METRIC_NAMES)])
        return buf.getvalue()


CSV_HEADER = ",".join(("project", "model", *METRIC_NAMES)) + "\n"


def report(records: Sequence[PredictionRecord], threshold: float = 0.5, ranking: str = "density") -> MetricsReport:
    """Every metric at once; undefined values become 0.0 and are flagged."""
    flags: list[str] = []
    (accuracy, precision, recall, f1, mcc), cflags = _classification(confusion(records, threshold))
    flags.extend(cflags)

    def guarded(name: str, fn, *args) -> float:
        try:
            return float(fn(records, *args))
        except (SingleClassEvalSet, ZeroEffort) as exc:
            flags.append(f"{name}_undefined: {exc}")
            return 0.0

    roc = guarded("roc_auc", roc_auc)
    pr = guarded("pr_auc", pr_auc)
    rae = guarded("recall_at_20_effort", recall_at_effort, 0.20, ranking)
    ear = guarded("effort_at_20_recall", effort_at_recall, 0.20, ranking)
    try:
        popt, degenerate = p_opt_detail(records, ranking)
        if degenerate:
            flags.append("p_opt_degenerate_curve")
    except (SingleClassEvalSet, ZeroEffort) as exc:
        popt = 0.0
        flags.append(f"p_opt_undefined: {exc}")
    return MetricsReport(accuracy, precision, recall, f1, mcc, roc, pr, rae, ear, popt, threshold, len(records), tuple(flags))
