"""Grouped affine data generators, including the two two-group mechanisms.

Every group shares one slope ``w`` but may have its own intercept, feature
distribution and noise levels::

    z   ~ Normal(feature_mean[g], feature_scale[g])
    x   = z + Normal(0, feature_noise_sd[g])
    y   = w * x + intercept[g] + Normal(0, label_noise_sd[g])

All second parameters of ``Normal`` are standard deviations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Allocation, GroupedDataset, SeedSpec
from .errors import ConfigError, UnknownGroupInAllocation

_PER_GROUP = ("intercepts", "feature_mean", "feature_scale", "feature_noise_sd", "label_noise_sd")


@dataclass(frozen=True)
class AffineGroupSpec:
    weight: float
    intercepts: dict
    feature_mean: dict
    feature_scale: dict
    feature_noise_sd: dict
    label_noise_sd: dict

    def __post_init__(self):
        groups = set(self.intercepts)
        for name in _PER_GROUP:
            if set(getattr(self, name)) != groups:
                raise ValueError(f"{name} must define exactly the groups {sorted(groups)}")
        for g in groups:
            if not self.feature_scale[g] > 0:
                raise ValueError(f"feature_scale for {g!r} must be positive")
            if self.feature_noise_sd[g] < 0 or self.label_noise_sd[g] < 0:
                raise ValueError(f"noise sds for {g!r} must be non-negative")

    @property
    def groups(self) -> list[str]:
        return sorted(self.intercepts)

    def to_dict(self) -> dict:
        out = {"weight": float(self.weight)}
        for name in _PER_GROUP:
            out[name] = {g: float(v) for g, v in sorted(getattr(self, name).items())}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AffineGroupSpec":
        keys = {"weight", *_PER_GROUP}
        unknown = set(d) - keys
        missing = keys - set(d)
        if unknown or missing:
            raise ConfigError(f"affine spec keys: unknown {sorted(unknown)}, missing {sorted(missing)}")
        try:
            return cls(float(d["weight"]), *({str(g): float(v) for g, v in d[k].items()} for k in _PER_GROUP))
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"invalid affine spec: {exc}") from exc

    def best_linear_predictor(self, g) -> tuple[float, float]:
        """Population least-squares (slope, intercept) of y on x within group ``g``.

        Since y is generated from the observed x, this is just (w, b_g).
        """
        return float(self.weight), float(self.intercepts[g])


def _uniform(value, groups=("A", "B")):
    return {g: value for g in groups}


def example1_spec() -> AffineGroupSpec:
    """Groups with different true intercepts and feature means."""
    return AffineGroupSpec(
        weight=-1.0,
        intercepts={"A": -10.0, "B": 10.0},
        feature_mean={"A": 10.0, "B": -10.0},
        feature_scale=_uniform(5.0),
        feature_noise_sd=_uniform(1.0),
        label_noise_sd=_uniform(1.0),
    )


def example2_spec() -> AffineGroupSpec:
    """One true model; group B has narrower features and 10x the noise."""
    return AffineGroupSpec(
        weight=-1.0,
        intercepts=_uniform(-10.0),
        feature_mean=_uniform(-10.0),
        feature_scale={"A": 5.0, "B": 2.0},
        feature_noise_sd={"A": 1.0, "B": 10.0},
        label_noise_sd={"A": 1.0, "B": 10.0},
    )


PRESETS = {"example1": example1_spec, "example2": example2_spec}


def gen_affine(spec: AffineGroupSpec, alloc: Allocation, seed: SeedSpec) -> GroupedDataset:
    """Fresh i.i.d. draws, ``alloc[g]`` rows per group, each tagged with its own group
    as evaluation group. Each group uses its own sub-stream, so one group's draws
    do not depend on how many rows another group asked for."""
    alloc = alloc if isinstance(alloc, Allocation) else Allocation(alloc)
    xs, ys, src = [], [], []
    for g, n in alloc.items():
        if g not in spec.intercepts:
            raise UnknownGroupInAllocation(g)
        if n == 0:
            continue
        rng = seed.generator(g)
        z = rng.normal(spec.feature_mean[g], spec.feature_scale[g], size=n)
        x = z + rng.normal(0.0, spec.feature_noise_sd[g], size=n)
        y = spec.weight * x + spec.intercepts[g] + rng.normal(0.0, spec.label_noise_sd[g], size=n)
        xs.append(x)
        ys.append(y)
        src += [g] * n
    if not xs:
        return GroupedDataset.empty(1)
    tags = {g: frozenset([g]) for g in alloc}
    return GroupedDataset(
        np.concatenate(xs).reshape(-1, 1),
        np.concatenate(ys),
        src,
        [tags[g] for g in src],
        feature_dim=1,
    )
