"""Per-group risks. Everything is oriented so that lower is better; AUROC
enters as its complement ``1 - AUROC``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GroupedDataset, group_name
from .errors import EmptyEvaluationGroup, SingleClassUndefined
from .learners import LinearModel

METRICS = ("mse", "auroc-complement")


@dataclass(frozen=True)
class GroupRisk:
    group: str
    metric: str
    value: float
    n_eval: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.n_eval <= 0:
            raise ValueError("n_eval must be positive")
        if self.metric == "auroc-complement" and not 0.0 <= self.value <= 1.0:
            raise ValueError("auroc-complement must lie in [0, 1]")

    def to_dict(self):
        return {"group": self.group, "metric": self.metric, "value": self.value, "n_eval": self.n_eval}


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC with midrank tie handling, O(n log n)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassUndefined()
    order = np.argsort(scores, kind="mergesort")
    ranked = scores[order]
    # average 1-based rank over each run of tied scores
    starts = np.r_[0, np.flatnonzero(np.diff(ranked)) + 1]
    ends = np.r_[starts[1:], len(ranked)]
    midranks = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    ranks = np.empty(len(scores))
    ranks[order] = midranks
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def group_slice(evalset: GroupedDataset, g):
    """Features, labels and source groups of rows tagged with eval group ``g``."""
    mask = evalset.eval_mask(g)
    if not mask.any():
        raise EmptyEvaluationGroup(group_name(g))
    return evalset.X[mask], evalset.y[mask], evalset.source_groups[mask]


def risk_value(scores, labels, metric="mse") -> float:
    metric = canonical_metric(metric)
    if metric == "mse":
        return float(np.mean((np.asarray(scores) - np.asarray(labels)) ** 2))
    return 1.0 - auroc(scores, labels)


def group_risk(model: LinearModel, evalset: GroupedDataset, g, metric="mse") -> GroupRisk:
    metric = canonical_metric(metric)
    X, y, src = group_slice(evalset, g)
    scores = model.scores(X, src)
    try:
        value = risk_value(scores, y, metric)
    except SingleClassUndefined:
        raise SingleClassUndefined(group_name(g)) from None
    return GroupRisk(group_name(g), metric, value, len(y))


def mse_risk(model: LinearModel, evalset: GroupedDataset, g) -> GroupRisk:
    return group_risk(model, evalset, g, "mse")


def group_auroc(model: LinearModel, evalset: GroupedDataset, g) -> GroupRisk:
    return group_risk(model, evalset, g, "auroc-complement")


def canonical_metric(metric: str) -> str:
    if metric == "auroc":
        return "auroc-complement"
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    return metric
