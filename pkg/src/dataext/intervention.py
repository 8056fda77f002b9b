"""Group-routed split models.

For each evaluation group with a significant positive ``delta`` the training
pool is subsampled to that group's best sub-allocation and the same procedure
is refitted; instances of that group are scored by the refit, everyone else by
the model trained on the full pool.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Allocation, GroupedDataset, SeedSpec, group_name, subsample
from .errors import EmptyEvaluationGroup, ReferenceNotInGrid
from .learners import LinearModel, TrainConfig, train
from .metrics import canonical_metric, risk_value
from .sweep import RiskSurface

DEFAULT_MAX_ROUTES = 16


@dataclass(frozen=True)
class Route:
    model: LinearModel
    sub_allocation: Allocation
    delta: float
    z: float = math.nan

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "sub_allocation": self.sub_allocation.counts,
            "delta": self.delta,
            "z": self.z if math.isfinite(self.z) else None,
        }


@dataclass(frozen=True)
class SplitModel:
    routes: dict
    fallback: LinearModel
    reference: Allocation | None = None

    def route_for(self, eval_groups) -> str | None:
        """Name of the route serving an instance, or None for the fallback.

        When several routed groups match, the one with the larger delta wins,
        then the lexicographically smaller name.
        """
        matched = [g for g in eval_groups if g in self.routes]
        if not matched:
            return None
        return min(matched, key=lambda g: (-self.routes[g].delta, g))

    def model_for(self, eval_groups) -> LinearModel:
        name = self.route_for(eval_groups)
        return self.fallback if name is None else self.routes[name].model

    def scores(self, X, source_groups, eval_groups) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        src = np.asarray(source_groups, dtype=object)
        out = self.fallback.scores(X, src)
        names = np.array([self.route_for(e) or "" for e in eval_groups], dtype=object)
        for name in sorted(set(names.tolist()) - {""}):
            m = names == name
            out[m] = self.routes[name].model.scores(X[m], src[m])
        return out

    def to_dict(self) -> dict:
        return {
            "routes": {g: r.to_dict() for g, r in sorted(self.routes.items())},
            "fallback": self.fallback.to_dict(),
            "reference": self.reference.counts if self.reference is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitModel":
        routes = {
            g: Route(
                LinearModel.from_dict(r["model"]),
                Allocation(r["sub_allocation"]),
                float(r["delta"]),
                math.nan if r.get("z") is None else float(r["z"]),
            )
            for g, r in d["routes"].items()
        }
        ref = d.get("reference")
        return cls(routes, LinearModel.from_dict(d["fallback"]), Allocation(ref) if ref is not None else None)


def build_split(
    dataset: GroupedDataset,
    surface: RiskSurface,
    delta_reports,
    config: TrainConfig,
    seed: SeedSpec,
    max_routes: int = DEFAULT_MAX_ROUTES,
) -> SplitModel:
    """Fit the fallback on ``dataset`` and one refit per significant positive delta."""
    reports = list(delta_reports)
    for rep in reports:
        surface.index_of(rep.reference)
        if rep.eval_group not in surface.eval_groups:
            raise ReferenceNotInGrid(f"report group {rep.eval_group!r} is not on the surface")
    fallback = train(dataset, config, seed.child("split-fallback"))
    chosen = sorted((r for r in reports if r.delta > 0 and r.significant), key=lambda r: (-r.delta, r.eval_group))
    if len(chosen) > max_routes:
        warnings.warn(
            f"{len(chosen)} groups qualify for a route; keeping the {max_routes} with the largest delta",
            stacklevel=2,
        )
        chosen = chosen[:max_routes]
    routes = {}
    for rep in chosen:
        stream = seed.child(f"split-route:{rep.eval_group}")
        part = subsample(dataset, rep.best_sub, stream)
        model = train(part, config, stream.child(f"split-cv:{rep.eval_group}"))
        routes[rep.eval_group] = Route(model, rep.best_sub, rep.delta, rep.z)
    reference = reports[0].reference if reports else None
    return SplitModel(routes, fallback, reference)


def predict_split(split: SplitModel, x, eval_groups=(), source_group=None) -> float:
    """Score one instance. ``source_group`` is only consulted by per-group-intercept models."""
    model = split.model_for(eval_groups)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(model.scores(x, [source_group])[0])


def evaluate_intervention(split: SplitModel, fallback: LinearModel, evalset: GroupedDataset, metric="mse", groups=None) -> dict:
    """``{group: (risk_before, risk_after)}``; before uses ``fallback`` everywhere.

    Rows the split routes to its fallback reuse the exact same score array, so
    untargeted groups come out bit-identical when ``fallback`` is the split's
    own fallback.
    """
    metric = canonical_metric(metric)
    groups = evalset.eval_group_names() if groups is None else [group_name(g) for g in groups]
    out = {}
    for g in groups:
        mask = evalset.eval_mask(g)
        if not mask.any():
            raise EmptyEvaluationGroup(g)
        X, y, src = evalset.X[mask], evalset.y[mask], evalset.source_groups[mask]
        tags = [e for e, m in zip(evalset.eval_groups, mask) if m]
        before_scores = fallback.scores(X, src)
        after_scores = before_scores.copy()
        names = np.array([split.route_for(e) or "" for e in tags], dtype=object)
        for name in sorted(set(names.tolist()) - {""}):
            m = names == name
            after_scores[m] = split.routes[name].model.scores(X[m], src[m])
        out[g] = (risk_value(before_scores, y, metric), risk_value(after_scores, y, metric))
    return out
