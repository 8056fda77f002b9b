"""Scan risk surfaces for allocations whose subsets do better.

A finding is a pair of grid allocations ``sub <= sup`` where the mean risk of
an evaluation group is lower at ``sub``: adding training data hurt that group.
``delta`` is the largest such gap below a reference allocation, restricted to
the points actually on the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Allocation, dominated_index_pairs, group_name
from .errors import AxisNotFound, ReferenceNotInGrid
from .sweep import RiskSurface

DEFAULT_Z = 2.0
TIE_POLICY = "ties broken toward the smallest total sample count, then by group counts"


def welch_z(diff: float, se_a: float, se_b: float) -> float:
    denom = math.sqrt(se_a**2 + se_b**2) if not (math.isnan(se_a) or math.isnan(se_b)) else math.nan
    if math.isnan(denom):
        return math.nan
    if denom == 0.0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / denom


def _finite(v):
    return v if math.isfinite(v) else None


@dataclass(frozen=True)
class ExternalityFinding:
    eval_group: str
    sup: Allocation
    sub: Allocation
    magnitude: float
    z: float
    significant: bool
    sup_index: int = -1
    sub_index: int = -1

    def to_dict(self) -> dict:
        return {
            "eval_group": self.eval_group,
            "sup": self.sup.counts,
            "sub": self.sub.counts,
            "magnitude": self.magnitude,
            "z": _finite(self.z),
            "significant": self.significant,
        }


@dataclass(frozen=True)
class DeltaReport:
    eval_group: str
    reference: Allocation
    best_sub: Allocation
    delta: float
    z: float
    significant: bool
    tie_policy: str = TIE_POLICY

    def to_dict(self) -> dict:
        return {
            "eval_group": self.eval_group,
            "reference": self.reference.counts,
            "best_sub": self.best_sub.counts,
            "delta": self.delta,
            "z": _finite(self.z),
            "significant": self.significant,
            "tie_policy": self.tie_policy,
        }


def _significant(z, threshold):
    return not math.isnan(z) and z >= threshold


def detect(surface: RiskSurface, z_threshold: float = DEFAULT_Z) -> list[ExternalityFinding]:
    """Every dominated grid pair with a mean-risk inversion, largest first."""
    pairs = dominated_index_pairs(surface.grid)
    findings = []
    for g in surface.eval_groups:
        for i, j in pairs:
            lo, hi = surface.cell(i, g), surface.cell(j, g)
            if not (lo.ok and hi.ok):
                continue
            gap = hi.mean - lo.mean
            if gap > 0:
                z = welch_z(gap, lo.se, hi.se)
                findings.append(
                    ExternalityFinding(g, surface.grid[j], surface.grid[i], gap, z, _significant(z, z_threshold), j, i)
                )
    findings.sort(key=lambda f: (-f.magnitude, f.eval_group, f.sub_index, f.sup_index))
    return findings


def _tie_key(alloc: Allocation, groups, index):
    return (alloc.total, tuple(alloc.get(g, 0) for g in groups), index)


def delta(surface: RiskSurface, eval_group, reference, z_threshold: float = DEFAULT_Z) -> DeltaReport:
    """Largest mean-risk reduction from any grid allocation dominated by ``reference``."""
    g = group_name(eval_group)
    reference = reference if isinstance(reference, Allocation) else Allocation(reference)
    if g not in surface.eval_groups:
        raise ReferenceNotInGrid(f"evaluation group {g!r} is not on the surface")
    r = surface.index_of(reference)
    ref_cell = surface.cell(r, g)
    if not ref_cell.ok:
        raise ReferenceNotInGrid(f"reference cell for group {g!r} failed: {ref_cell.error}")
    groups = surface.source_groups
    best, best_gap = r, 0.0
    for i in surface.valid_indices(g):
        if i == r or not surface.grid[i] <= reference:
            continue
        gap = ref_cell.mean - surface.mean(i, g)
        if gap <= 0:
            continue
        if gap > best_gap or (
            gap == best_gap and _tie_key(surface.grid[i], groups, i) < _tie_key(surface.grid[best], groups, best)
        ):
            best, best_gap = i, gap
    if best == r:
        return DeltaReport(g, surface.grid[r], surface.grid[r], 0.0, 0.0, False)
    z = welch_z(best_gap, ref_cell.se, surface.se(best, g))
    return DeltaReport(g, surface.grid[r], surface.grid[best], best_gap, z, _significant(z, z_threshold))


@dataclass(frozen=True)
class Segment:
    lo: Allocation
    hi: Allocation
    change: float
    sign: int
    z: float

    def to_dict(self) -> dict:
        return {"from": self.lo.counts, "to": self.hi.counts, "change": self.change, "sign": self.sign, "z": _finite(self.z)}


def axis_lines(surface: RiskSurface, varying) -> list[list[int]]:
    """Grid indices grouped into lines along ``varying`` (other counts fixed), each sorted."""
    varying = group_name(varying)
    if varying not in surface.source_groups:
        raise AxisNotFound(f"group {varying!r} is not part of the grid")
    others = [g for g in surface.source_groups if g != varying]
    lines: dict[tuple, list[int]] = {}
    for i, a in enumerate(surface.grid):
        lines.setdefault(tuple(a.get(g, 0) for g in others), []).append(i)
    out = []
    for key in sorted(lines):
        ix = sorted(lines[key], key=lambda i: (surface.grid[i].get(varying, 0), i))
        if len({surface.grid[i].get(varying, 0) for i in ix}) >= 2:
            out.append(ix)
    if not out:
        raise AxisNotFound(f"no grid line varies group {varying!r}")
    return out


def slope_scan(surface: RiskSurface, eval_group, varying, tol: float = 1e-12) -> list[Segment]:
    """Sign and Welch z of the mean-risk change between adjacent valid points on each line."""
    g = group_name(eval_group)
    segments = []
    for line in axis_lines(surface, varying):
        valid = [i for i in line if surface.cell(i, g).ok]
        for a, b in zip(valid, valid[1:]):
            lo, hi = surface.cell(a, g), surface.cell(b, g)
            change = hi.mean - lo.mean
            scale = max(abs(hi.mean), abs(lo.mean), 1.0)
            sign = 0 if abs(change) <= tol * scale else (1 if change > 0 else -1)
            segments.append(Segment(surface.grid[a], surface.grid[b], change, sign, welch_z(change, lo.se, hi.se)))
    return segments
