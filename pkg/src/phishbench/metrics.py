"""Precision-oriented evaluation: PR/ROC curves, average precision,
precision-at-recall, confusion matrices, stratified bootstrap intervals,
and per-base-rate aggregation.

Average precision is the step-wise sum (R_k - R_{k-1}) * P_k over the
descending-threshold sweep, with no interpolation; tied scores collapse to
one threshold so metrics are order-independent.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    threshold: float


@dataclass
class PRCurve:
    points: list

    def max_recall(self) -> float:
        return self.points[-1].recall if self.points else 0.0


@dataclass(frozen=True)
class ConfusionEntry:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float | None
    recall: float


@dataclass
class MetricReport:
    ap: float
    p_at_r: dict
    roc_auc: float | None = None
    confusion: list = field(default_factory=list)
    ci: dict | None = None
    n: int = 0
    n_positive: int = 0

    def to_dict(self) -> dict:
        out = {"ap": self.ap, "p_at_r": {str(k): v for k, v in self.p_at_r.items()},
               "n": self.n, "n_positive": self.n_positive}
        if self.roc_auc is not None:
            out["roc_auc"] = self.roc_auc
        if self.confusion:
            out["confusion"] = [vars(c) for c in self.confusion]
        if self.ci is not None:
            out["ci"] = self.ci
        return out


def _check_inputs(scores: Sequence[float], labels: Sequence[int], need_positive=True):
    if len(scores) != len(labels):
        raise ValueError("scores and labels must align")
    if any(lab not in (0, 1) for lab in labels):
        raise ValueError("labels must be 0/1")
    if any(not np.isfinite(s) for s in scores):
        raise ValueError("scores must be finite")
    if need_positive and sum(labels) == 0:
        raise ValueError("at least one positive label required")


def pr_curve(scores: Sequence[float], labels: Sequence[int]) -> PRCurve:
    """Sweep distinct scores descending; predictions are positive at
    score >= threshold, ties grouped at one threshold."""
    _check_inputs(scores, labels)
    n_pos = sum(labels)
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    points = []
    tp = pp = 0
    i = 0
    while i < len(order):
        threshold = scores[order[i]]
        while i < len(order) and scores[order[i]] == threshold:
            tp += labels[order[i]]
            pp += 1
            i += 1
        points.append(PRPoint(recall=tp / n_pos, precision=tp / pp, threshold=threshold))
    return PRCurve(points)


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Step-wise area under the PR sweep."""
    curve = pr_curve(scores, labels)
    ap = 0.0
    prev_recall = 0.0
    for point in curve.points:
        ap += (point.recall - prev_recall) * point.precision
        prev_recall = point.recall
    return ap


def precision_at_recall(curve: PRCurve, r: float, return_reachable: bool = False):
    """Max precision over sweep points with recall >= r (the monotonized
    envelope); 0.0 when recall r is unreachable."""
    if not (0 <= r <= 1):
        raise ValueError(f"recall target must be in [0, 1], got {r}")
    candidates = [p.precision for p in curve.points if p.recall >= r]
    reachable = bool(candidates)
    value = max(candidates) if candidates else 0.0
    return (value, reachable) if return_reachable else value


def confusion_at_threshold(scores: Sequence[float], labels: Sequence[int],
                           t: float) -> ConfusionEntry:
    """Counts for predicting positive iff score >= t."""
    _check_inputs(scores, labels, need_positive=False)
    tp = fp = tn = fn = 0
    for s, y in zip(scores, labels):
        if s >= t:
            tp += y
            fp += 1 - y
        else:
            fn += y
            tn += 1 - y
    precision = tp / (tp + fp) if (tp + fp) else None
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    return ConfusionEntry(threshold=t, tp=tp, fp=fp, tn=tn, fn=fn,
                          precision=precision, recall=recall)


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Trapezoidal area under the ROC sweep (optional in reports)."""
    _check_inputs(scores, labels)
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_neg == 0:
        raise ValueError("at least one negative label required for ROC")
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    auc = 0.0
    tp = fp = 0
    prev_tpr = prev_fpr = 0.0
    i = 0
    while i < len(order):
        threshold = scores[order[i]]
        while i < len(order) and scores[order[i]] == threshold:
            tp += labels[order[i]]
            fp += 1 - labels[order[i]]
            i += 1
        tpr, fpr = tp / n_pos, fp / n_neg
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2
        prev_tpr, prev_fpr = tpr, fpr
    auc += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2 if prev_fpr < 1.0 else 0.0
    return auc


def stratified_bootstrap(scores: Sequence[float], labels: Sequence[int],
                         metric: Callable[[Sequence[float], Sequence[int]], float],
                         n_resamples: int = 1000, confidence: float = 0.95,
                         seed: int = 0) -> tuple[float, float, float]:
    """Percentile interval from resampling within each class independently,
    preserving class counts. Returns (mean, lower, upper)."""
    _check_inputs(scores, labels)
    if n_resamples < 100:
        raise ValueError("n_resamples must be >= 100")
    pos_idx = np.array([i for i, y in enumerate(labels) if y == 1])
    neg_idx = np.array([i for i, y in enumerate(labels) if y == 0])
    if len(pos_idx) == 0 or len(neg_idx) == 0:
        raise ValueError("stratified bootstrap requires both classes")
    scores_arr = np.asarray(scores, dtype=float)
    labels_arr = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    values = np.empty(n_resamples)
    for b in range(n_resamples):
        take = np.concatenate([rng.choice(pos_idx, size=len(pos_idx), replace=True),
                               rng.choice(neg_idx, size=len(neg_idx), replace=True)])
        values[b] = metric(scores_arr[take].tolist(), labels_arr[take].tolist())
    alpha = (1 - confidence) / 2
    lower, upper = np.quantile(values, [alpha, 1 - alpha])
    return float(values.mean()), float(lower), float(upper)


def aggregate_instances(per_instance_metrics: Sequence[float], confidence: float = 0.95,
                        n_resamples: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Mean over instances, with error = the maximum absolute deviation of the
    bootstrap percentile interval from that mean."""
    values = np.asarray(per_instance_metrics, dtype=float)
    if values.size == 0:
        raise ValueError("at least one instance metric required")
    mean = float(values.mean())
    if values.size == 1 or np.allclose(values, values[0]):
        return mean, 0.0
    rng = np.random.default_rng(seed)
    resampled = np.empty(n_resamples)
    for b in range(n_resamples):
        resampled[b] = rng.choice(values, size=values.size, replace=True).mean()
    alpha = (1 - confidence) / 2
    lower, upper = np.quantile(resampled, [alpha, 1 - alpha])
    return mean, float(max(abs(mean - lower), abs(upper - mean)))


def evaluate(scores: Sequence[float], labels: Sequence[int],
             recall_targets: Sequence[float] = (0.9,),
             thresholds: Sequence[float] = (0.3, 0.5, 0.7, 0.9),
             with_roc: bool = True, ci_resamples: int = 0,
             confidence: float = 0.95, seed: int = 0) -> MetricReport:
    """One-stop report for a scored set."""
    curve = pr_curve(scores, labels)
    report = MetricReport(
        ap=average_precision(scores, labels),
        p_at_r={r: precision_at_recall(curve, r) for r in recall_targets},
        roc_auc=roc_auc(scores, labels) if with_roc and 0 < sum(labels) < len(labels) else None,
        confusion=[confusion_at_threshold(scores, labels, t) for t in thresholds],
        n=len(labels),
        n_positive=sum(labels),
    )
    if ci_resamples:
        mean, lower, upper = stratified_bootstrap(scores, labels, average_precision,
                                                  n_resamples=ci_resamples,
                                                  confidence=confidence, seed=seed)
        report.ci = {"metric": "ap", "mean": mean, "lower": lower, "upper": upper,
                     "confidence": confidence, "method": "stratified-bootstrap"}
    return report


def curve_to_csv(curve: PRCurve, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "recall"])
        for point in curve.points:
            writer.writerow([repr(point.threshold), repr(point.precision),
                             repr(point.recall)])


def report_to_json(report: MetricReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def plot_data(curve: PRCurve) -> dict:
    """Plain arrays for any external plotting tool."""
    return {"recall": [p.recall for p in curve.points],
            "precision": [p.precision for p in curve.points],
            "threshold": [p.threshold for p in curve.points]}
