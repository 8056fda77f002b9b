"""Domain types, seeded sampling and the allocation order shared by every module."""
from __future__ import annotations

import hashlib
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import AllocationExceedsAvailable

TASKS = ("regression", "binary-classification")
GROUP_KINDS = ("source", "eval")


@dataclass(frozen=True)
class GroupId:
    name: str
    kind: str = "source"

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("group name must be a non-empty string")
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"group kind must be one of {GROUP_KINDS}, got {self.kind!r}")

    def __str__(self):
        return self.name


def group_name(g) -> str:
    name = g.name if isinstance(g, GroupId) else g
    if not isinstance(name, str) or not name:
        raise ValueError(f"invalid group identifier {g!r}")
    return name


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    label: float
    source_group: str
    eval_groups: frozenset = frozenset()


class GroupedDataset:
    """Array-backed labelled dataset where each row carries one source group.

    Rows may additionally be tagged with any number of evaluation groups.
    Instances are immutable once constructed; the per-group index is
    built eagerly so lookups are a dict access.
    """

    def __init__(self, X, y, source_groups, eval_groups=None, task="regression", feature_dim=None):
        if task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {task!r}")
        y = np.asarray(y, dtype=float).reshape(-1)
        n = len(y)
        X = np.asarray(X, dtype=float)
        if X.size == 0 and n == 0:
            if feature_dim is None:
                feature_dim = X.shape[1] if X.ndim == 2 else 0
            X = np.zeros((0, feature_dim))
        if X.ndim == 1:
            X = X.reshape(n, -1) if n else X.reshape(0, -1)
        if X.ndim != 2 or X.shape[0] != n:
            raise ValueError(f"features must be an (n, d) array matching {n} labels, got {X.shape}")
        if feature_dim is not None and X.shape[1] != feature_dim:
            raise ValueError(f"feature_dim {feature_dim} does not match features of width {X.shape[1]}")
        if X.shape[1] < 1:
            raise ValueError("feature_dim must be positive")
        source = [group_name(g) for g in source_groups]
        if len(source) != n:
            raise ValueError("one source group is required per instance")
        if eval_groups is None:
            evals = tuple(frozenset() for _ in range(n))
        else:
            evals = tuple(frozenset(group_name(g) for g in e) for e in eval_groups)
            if len(evals) != n:
                raise ValueError("one eval-group set is required per instance")
        if task == "binary-classification" and n and not np.all((y == 0) | (y == 1)):
            raise ValueError("classification labels must be 0 or 1")

        X = X.copy()
        y = y.copy()
        X.flags.writeable = False
        y.flags.writeable = False
        self._X = X
        self._y = y
        self._source = np.array(source, dtype=object)
        self._source.flags.writeable = False
        self._eval = evals
        self.task = task

        index: dict[str, list[int]] = {}
        for i, g in enumerate(source):
            index.setdefault(g, []).append(i)
        self._index = {g: np.array(ix, dtype=np.intp) for g, ix in sorted(index.items())}
        self._canonical: dict[str, np.ndarray] = {}
        self._masks: dict[str, np.ndarray] = {}

    @classmethod
    def from_instances(cls, instances: Iterable[Instance], task="regression", feature_dim=None):
        instances = list(instances)
        if not instances:
            return cls.empty(feature_dim or 1, task)
        X = np.stack([np.asarray(inst.features, dtype=float) for inst in instances])
        return cls(
            X,
            [inst.label for inst in instances],
            [inst.source_group for inst in instances],
            [inst.eval_groups for inst in instances],
            task=task,
            feature_dim=feature_dim,
        )

    @classmethod
    def empty(cls, feature_dim: int, task="regression"):
        return cls(np.zeros((0, feature_dim)), [], [], [], task=task, feature_dim=feature_dim)

    @classmethod
    def concat(cls, parts: Sequence["GroupedDataset"]):
        if not parts:
            raise ValueError("nothing to concatenate")
        dims = {p.feature_dim for p in parts}
        tasks = {p.task for p in parts}
        if len(dims) != 1 or len(tasks) != 1:
            raise ValueError("datasets disagree on feature_dim or task")
        return cls(
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.y for p in parts]),
            [g for p in parts for g in p.source_groups],
            [e for p in parts for e in p.eval_groups],
            task=parts[0].task,
            feature_dim=parts[0].feature_dim,
        )

    # array views -----------------------------------------------------------
    @property
    def X(self) -> np.ndarray:
        return self._X

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def source_groups(self) -> np.ndarray:
        return self._source

    @property
    def eval_groups(self) -> tuple:
        return self._eval

    @property
    def feature_dim(self) -> int:
        return self._X.shape[1]

    def __len__(self):
        return len(self._y)

    def __iter__(self) -> Iterator[Instance]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> Instance:
        return Instance(self._X[i], float(self._y[i]), self._source[i], self._eval[i])

    # group queries ---------------------------------------------------------
    def groups(self) -> list[str]:
        return list(self._index)

    def eval_group_names(self) -> list[str]:
        return sorted(set().union(*self._eval)) if self._eval else []

    def counts(self) -> dict[str, int]:
        return {g: len(ix) for g, ix in self._index.items()}

    def count(self, g) -> int:
        ix = self._index.get(group_name(g))
        return 0 if ix is None else len(ix)

    def indices(self, g) -> np.ndarray:
        return self._index.get(group_name(g), np.zeros(0, dtype=np.intp))

    def eval_mask(self, g) -> np.ndarray:
        g = group_name(g)
        mask = self._masks.get(g)
        if mask is None:
            mask = np.fromiter((g in e for e in self._eval), dtype=bool, count=len(self))
            mask.flags.writeable = False
            self._masks[g] = mask
        return mask

    def take(self, idx) -> "GroupedDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return GroupedDataset(
            self._X[idx],
            self._y[idx],
            self._source[idx],
            [self._eval[i] for i in idx],
            task=self.task,
            feature_dim=self.feature_dim,
        )

    def canonical_indices(self, g) -> np.ndarray:
        """Indices of group ``g`` sorted by row content, so selection never
        depends on the order rows were supplied in."""
        g = group_name(g)
        cached = self._canonical.get(g)
        if cached is not None:
            return cached
        ix = self.indices(g)
        if len(ix) > 1:
            ev = np.array(["\x1f".join(sorted(self._eval[i])) for i in ix])
            keys = [ev, self._y[ix]] + [self._X[ix, j] for j in range(self.feature_dim - 1, -1, -1)]
            ix = ix[np.lexsort(keys)]
        self._canonical[g] = ix
        return ix

    def same_content(self, other: "GroupedDataset") -> bool:
        """Field-by-field equality, ignoring nothing (order included)."""
        return (
            self.task == other.task
            and self.feature_dim == other.feature_dim
            and len(self) == len(other)
            and np.array_equal(self._X, other._X)
            and np.array_equal(self._y, other._y)
            and list(self._source) == list(other._source)
            and self._eval == other._eval
        )

    def __repr__(self):
        return f"GroupedDataset(n={len(self)}, d={self.feature_dim}, task={self.task!r}, counts={self.counts()})"


class Allocation(Mapping):
    """Per-source-group sample counts.

    Equality and hashing ignore groups with a zero count, so ``{A: 3}`` and
    ``{A: 3, B: 0}`` denote the same training-set composition.
    ``a <= b`` is the componentwise dominance order.
    """

    __slots__ = ("_counts", "_key")

    def __init__(self, counts: Mapping | Iterable = ()):
        items = dict(counts)
        clean = {}
        for g, n in items.items():
            g = group_name(g)
            if isinstance(n, bool) or int(n) != n or n < 0:
                raise ValueError(f"count for group {g!r} must be a non-negative integer, got {n!r}")
            clean[g] = int(n)
        self._counts = dict(sorted(clean.items()))
        self._key = tuple((g, n) for g, n in self._counts.items() if n > 0)

    def __getitem__(self, g):
        return self._counts[group_name(g)]

    def get(self, g, default=0):
        return self._counts.get(group_name(g), default)

    def __iter__(self):
        return iter(self._counts)

    def __len__(self):
        return len(self._counts)

    def __eq__(self, other):
        if isinstance(other, Allocation):
            return self._key == other._key
        if isinstance(other, Mapping):
            return self == Allocation(other)
        return NotImplemented

    def __hash__(self):
        return hash(self._key)

    def __le__(self, other: "Allocation") -> bool:
        groups = set(self._counts) | set(other._counts)
        return all(self.get(g) <= other.get(g) for g in groups)

    def __ge__(self, other: "Allocation") -> bool:
        return other <= self

    def __lt__(self, other: "Allocation") -> bool:
        return self <= other and self != other

    def __gt__(self, other: "Allocation") -> bool:
        return other < self

    @property
    def total(self) -> int:
        return sum(self._counts.values())

    @property
    def counts(self) -> dict[str, int]:
        return dict(self._counts)

    def with_groups(self, groups: Iterable[str]) -> "Allocation":
        """Same allocation with explicit zero entries for any missing groups."""
        c = {g: 0 for g in groups}
        c.update(self._counts)
        return Allocation(c)

    def label(self) -> str:
        return ",".join(f"{g}={n}" for g, n in self._counts.items())

    def __repr__(self):
        return f"Allocation({self._counts})"


def dominated_index_pairs(grid: Sequence[Allocation]) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)`` with ``grid[i] <= grid[j]`` and ``grid[i] != grid[j]``."""
    pairs = []
    for i, sub in enumerate(grid):
        for j, sup in enumerate(grid):
            if i != j and sub < sup:
                pairs.append((i, j))
    return pairs


def dominated_pairs(grid: Sequence[Allocation]) -> list[tuple[Allocation, Allocation]]:
    if not grid:
        raise ValueError("grid must be non-empty")
    return [(grid[i], grid[j]) for i, j in dominated_index_pairs(grid)]


def _label_int(label) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if label < 0:
            raise ValueError("stream labels must be non-negative")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class SeedSpec:
    """A named random stream derived from a master seed.

    The stream is a hash of (master seed, purpose tag, trial, allocation index)
    so any worker can rebuild it without coordination.
    """

    master_seed: int = 0
    purpose: str = "default"
    trial: int = 0
    alloc: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.trial < 0 or self.alloc < 0:
            raise ValueError("trial and allocation indices must be non-negative")

    def child(self, purpose: str, trial: int = 0, alloc: int = 0) -> "SeedSpec":
        return SeedSpec(self.master_seed, purpose, trial, alloc)

    def sequence(self, *extra) -> np.random.SeedSequence:
        entropy = [int(self.master_seed), _label_int(self.purpose), int(self.trial), int(self.alloc)]
        entropy += [_label_int(e) for e in extra]
        return np.random.SeedSequence(entropy)

    def generator(self, *extra) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence(*extra)))


def subsample(dataset: GroupedDataset, alloc: Allocation, seed: SeedSpec) -> GroupedDataset:
    """Draw exactly ``alloc[g]`` rows of each group uniformly without replacement."""
    alloc = alloc if isinstance(alloc, Allocation) else Allocation(alloc)
    picks = []
    for g, n in alloc.items():
        available = dataset.count(g)
        if n > available:
            raise AllocationExceedsAvailable(g, n, available)
        if n == 0:
            continue
        canon = dataset.canonical_indices(g)
        chosen = seed.generator(g).choice(available, size=n, replace=False)
        picks.append(canon[np.sort(chosen)])
    if not picks:
        return GroupedDataset.empty(dataset.feature_dim, dataset.task)
    return dataset.take(np.concatenate(picks))
