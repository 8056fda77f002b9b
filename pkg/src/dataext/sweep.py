"""Monte-Carlo estimation of per-group risk as a function of training allocation.

For every allocation on the grid and every trial a training set is drawn
(fresh synthetic draws, or a uniform subsample of an empirical pool), the
fixed training procedure is fitted, and each evaluation group is scored on
evaluation sets that stay fixed for the whole plan.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Allocation, GroupedDataset, SeedSpec, group_name, subsample
from .errors import (
    AllocationExceedsAvailable,
    DataError,
    DataExternalityError,
    DataLeakage,
    ReferenceNotInGrid,
    UnknownGroupInAllocation,
)
from .learners import TrainConfig, train
from .metrics import canonical_metric, group_risk
from .synthetic import AffineGroupSpec, gen_affine

DEFAULT_AXIS = (0, 10, 100, 1_000, 10_000, 100_000)
DEFAULT_TRIALS = 10
DEFAULT_EVAL_SIZE = 10_000


def grid_axis(fixed: dict, varying, values: Sequence[int]) -> list[Allocation]:
    """One allocation per value of ``varying``, all other groups held at ``fixed``."""
    varying = group_name(varying)
    values = list(values)
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError("axis values must be sorted ascending")
    return [Allocation({**fixed, varying: v}) for v in values]


def synthetic_evalset(spec: AffineGroupSpec, groups, size: int, seed: SeedSpec) -> GroupedDataset:
    return gen_affine(spec, Allocation({g: size for g in groups}), seed.child("eval"))


@dataclass(frozen=True)
class SweepPlan:
    source: AffineGroupSpec | GroupedDataset
    grid: tuple
    train_config: TrainConfig = field(default_factory=TrainConfig)
    evalset: GroupedDataset | None = None
    eval_groups: tuple | None = None
    trials: int = DEFAULT_TRIALS
    metric: str = "mse"
    seed: int = 0
    eval_size: int = DEFAULT_EVAL_SIZE
    check_leakage: bool = True

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(a if isinstance(a, Allocation) else Allocation(a) for a in self.grid))
        object.__setattr__(self, "metric", canonical_metric(self.metric))
        if not self.grid:
            raise ValueError("allocation grid must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.evalset is None and not self.synthetic:
            raise ValueError("an empirical sweep needs an explicit evaluation set")
        if self.eval_groups is not None:
            object.__setattr__(self, "eval_groups", tuple(group_name(g) for g in self.eval_groups))

    @property
    def synthetic(self) -> bool:
        return isinstance(self.source, AffineGroupSpec)

    @property
    def master(self) -> SeedSpec:
        return SeedSpec(self.seed, "sweep")

    @property
    def source_groups(self) -> list[str]:
        names = set()
        for a in self.grid:
            names.update(a)
        return sorted(names)

    def resolved_evalset(self) -> GroupedDataset:
        if self.evalset is not None:
            return self.evalset
        return synthetic_evalset(self.source, self.eval_groups or self.source.groups, self.eval_size, self.master)

    def resolved_eval_groups(self, evalset=None) -> tuple:
        if self.eval_groups is not None:
            return self.eval_groups
        evalset = evalset if evalset is not None else self.resolved_evalset()
        return tuple(evalset.eval_group_names())

    def validate(self, evalset):
        for a in self.grid:
            for g, n in a.items():
                if self.synthetic:
                    if g not in self.source.intercepts:
                        raise UnknownGroupInAllocation(g)
                elif n > self.source.count(g):
                    raise AllocationExceedsAvailable(g, n, self.source.count(g))
        if not self.synthetic and self.check_leakage:
            check_disjoint(self.source, evalset)

    def echo(self) -> dict:
        return {
            "source": self.source.to_dict() if self.synthetic else {"empirical": self.source.counts()},
            "grid": [a.counts for a in self.grid],
            "trials": self.trials,
            "metric": self.metric,
            "seed": self.seed,
            "eval_size": self.eval_size if self.evalset is None else len(self.evalset),
            "train": self.train_config.to_dict(),
            "config_fingerprint": self.train_config.fingerprint(),
        }


def _row_keys(ds: GroupedDataset) -> set:
    return {(g, float(v), ds.X[i].tobytes()) for i, (g, v) in enumerate(zip(ds.source_groups, ds.y))}


def check_disjoint(pool: GroupedDataset, evalset: GroupedDataset):
    shared = _row_keys(pool) & _row_keys(evalset)
    if shared:
        raise DataLeakage(f"{len(shared)} evaluation rows also appear in the training pool")


@dataclass(frozen=True)
class Cell:
    alloc_index: int
    eval_group: str
    risks: tuple = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mean(self) -> float:
        return float(np.mean(self.risks)) if self.ok and self.risks else math.nan

    @property
    def se(self) -> float:
        if not self.ok or len(self.risks) < 2:
            return math.nan
        return float(np.std(self.risks, ddof=1) / math.sqrt(len(self.risks)))


def _fmt(v: float) -> str:
    return repr(float(v))


class RiskSurface:
    """Trial-level risks for every (allocation, evaluation group) cell."""

    def __init__(self, grid, eval_groups, cells, trials, metric="mse", plan=None):
        self.grid = tuple(a if isinstance(a, Allocation) else Allocation(a) for a in grid)
        self.eval_groups = tuple(eval_groups)
        self.trials = int(trials)
        self.metric = canonical_metric(metric)
        self.plan = dict(plan or {})
        self._cells = {}
        for c in cells:
            self._cells[(c.alloc_index, c.eval_group)] = c
        for i in range(len(self.grid)):
            for g in self.eval_groups:
                if (i, g) not in self._cells:
                    raise ValueError(f"missing cell for allocation {i}, group {g!r}")

    @classmethod
    def from_trials(cls, grid, table: dict, metric="mse", plan=None):
        """Build from ``{(alloc_index, group): risks or error-string}``."""
        cells = []
        trials = 0
        for (i, g), v in table.items():
            if isinstance(v, str):
                cells.append(Cell(i, g, (), v))
            else:
                risks = tuple(float(r) for r in np.atleast_1d(v))
                trials = max(trials, len(risks))
                cells.append(Cell(i, g, risks))
        groups = sorted({g for _, g in table})
        return cls(grid, groups, cells, trials, metric, plan)

    @property
    def source_groups(self) -> list[str]:
        names = set()
        for a in self.grid:
            names.update(a)
        return sorted(names)

    @property
    def cells(self) -> list[Cell]:
        return [self._cells[(i, g)] for i in range(len(self.grid)) for g in self.eval_groups]

    def cell(self, i: int, g) -> Cell:
        return self._cells[(i, group_name(g))]

    def mean(self, i, g) -> float:
        return self.cell(i, g).mean

    def se(self, i, g) -> float:
        return self.cell(i, g).se

    def valid_indices(self, g) -> list[int]:
        return [i for i in range(len(self.grid)) if self.cell(i, g).ok]

    def index_of(self, alloc) -> int:
        alloc = alloc if isinstance(alloc, Allocation) else Allocation(alloc)
        for i, a in enumerate(self.grid):
            if a == alloc:
                return i
        raise ReferenceNotInGrid(f"allocation {alloc.label() or '(empty)'} is not on the grid")

    def subset(self, indices: Sequence[int]) -> "RiskSurface":
        indices = list(indices)
        remap = {old: new for new, old in enumerate(indices)}
        cells = [
            Cell(remap[c.alloc_index], c.eval_group, c.risks, c.error)
            for c in self.cells
            if c.alloc_index in remap
        ]
        return RiskSurface([self.grid[i] for i in indices], self.eval_groups, cells, self.trials, self.metric, self.plan)

    def scaled(self, c: float) -> "RiskSurface":
        cells = [Cell(x.alloc_index, x.eval_group, tuple(c * r for r in x.risks), x.error) for x in self.cells]
        return RiskSurface(self.grid, self.eval_groups, cells, self.trials, self.metric, self.plan)

    # serialisation ---------------------------------------------------------
    def _alloc_cols(self, i):
        a = self.grid[i]
        return [str(a.get(g, 0)) for g in self.source_groups]

    def to_detail_csv(self, path):
        groups = self.source_groups
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alloc_index", *(f"n_{g}" for g in groups), "eval_group", "trial", "risk", "error"])
            for c in self.cells:
                head = [str(c.alloc_index), *self._alloc_cols(c.alloc_index), c.eval_group]
                if c.ok:
                    for t, r in enumerate(c.risks):
                        w.writerow([*head, str(t), _fmt(r), ""])
                else:
                    w.writerow([*head, "", "", c.error])

    def to_summary_csv(self, path):
        groups = self.source_groups
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alloc_index", *(f"n_{g}" for g in groups), "eval_group", "mean", "se", "trials", "error"])
            for c in self.cells:
                w.writerow([
                    str(c.alloc_index),
                    *self._alloc_cols(c.alloc_index),
                    c.eval_group,
                    _fmt(c.mean) if c.ok else "",
                    _fmt(c.se) if c.ok else "",
                    str(len(c.risks)),
                    c.error or "",
                ])

    @classmethod
    def from_detail_csv(cls, path, metric="mse", plan=None) -> "RiskSurface":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DataError(f"{path}: empty surface file")
        header = rows[0]
        required = {"alloc_index", "eval_group", "trial", "risk", "error"}
        if not required <= set(header):
            raise DataError(f"{path}: surface header must contain {sorted(required)}")
        col = {name: k for k, name in enumerate(header)}
        count_cols = [(name[2:], k) for k, name in enumerate(header) if name.startswith("n_")]
        grid: dict[int, Allocation] = {}
        risks: dict[tuple, list] = {}
        errors: dict[tuple, str] = {}
        groups: list[str] = []
        try:
            for r in rows[1:]:
                i = int(r[col["alloc_index"]])
                grid.setdefault(i, Allocation({g: int(r[k]) for g, k in count_cols}))
                g = r[col["eval_group"]]
                if g not in groups:
                    groups.append(g)
                if r[col["error"]]:
                    errors[(i, g)] = r[col["error"]]
                else:
                    risks.setdefault((i, g), []).append((int(r[col["trial"]]), float(r[col["risk"]])))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: malformed surface row: {exc}") from exc
        if sorted(grid) != list(range(len(grid))):
            raise DataError(f"{path}: alloc_index values must be 0..k-1")
        cells = [Cell(i, g, (), e) for (i, g), e in errors.items()]
        trials = 0
        for (i, g), tr in risks.items():
            tr.sort()
            trials = max(trials, len(tr))
            cells.append(Cell(i, g, tuple(v for _, v in tr)))
        return cls([grid[i] for i in range(len(grid))], groups, cells, trials, metric, plan)


def _unit(plan: SweepPlan, evalset, groups, a: int, t: int) -> dict:
    alloc = plan.grid[a]
    master = plan.master
    try:
        if plan.synthetic:
            data = gen_affine(plan.source, alloc, master.child("train", t, a))
        else:
            data = subsample(plan.source, alloc, master.child("subsample", t, a))
        model = train(data, plan.train_config, master.child("cv", t, a))
    except (DataExternalityError, np.linalg.LinAlgError) as exc:
        return {g: _describe(exc) for g in groups}
    out = {}
    for g in groups:
        try:
            out[g] = group_risk(model, evalset, g, plan.metric).value
        except (DataExternalityError, np.linalg.LinAlgError) as exc:
            out[g] = _describe(exc)
    return out


def _describe(exc) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_sweep(plan: SweepPlan, threads: int = 1) -> RiskSurface:
    """Estimate the risk surface. Output is identical for any ``threads``."""
    evalset = plan.resolved_evalset()
    groups = plan.resolved_eval_groups(evalset)
    plan.validate(evalset)
    units = [(a, t) for a in range(len(plan.grid)) for t in range(plan.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda u: _unit(plan, evalset, groups, *u), units))
    else:
        results = [_unit(plan, evalset, groups, a, t) for a, t in units]

    by_cell: dict[tuple, list] = {}
    for (a, t), res in zip(units, results):
        for g in groups:
            by_cell.setdefault((a, g), []).append(res[g])
    cells = []
    for (a, g), vals in by_cell.items():
        err = next((v for v in vals if isinstance(v, str)), None)
        cells.append(Cell(a, g, (), err) if err else Cell(a, g, tuple(vals)))
    return RiskSurface(plan.grid, groups, cells, plan.trials, plan.metric, plan.echo())
