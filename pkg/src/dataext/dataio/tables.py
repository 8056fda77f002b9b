"""Grouped dataset CSV files: ``group,label,f0..fk`` or ``group,label,text``."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..core import TASKS, GroupedDataset, SeedSpec
from ..errors import ParseError, SchemaMismatch
from .text import TfidfSpec, fit_tfidf


@dataclass(frozen=True)
class CsvSchema:
    group: str = "group"
    label: str = "label"
    features: tuple | None = None   # None: every column other than group/label/text
    text: str | None = None
    task: str = "regression"

    def __post_init__(self):
        if self.task not in TASKS:
            raise SchemaMismatch(f"task must be one of {TASKS}")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path}: file is empty (a header row is required)")
    return rows[0], rows[1:]


def _columns(header, schema):
    col = {name: k for k, name in enumerate(header)}
    for name in (schema.group, schema.label):
        if name not in col:
            raise SchemaMismatch(f"column {name!r} not found in header {header}")
    if schema.text is not None:
        if schema.text not in col:
            raise SchemaMismatch(f"text column {schema.text!r} not found in header {header}")
        return col, []
    if schema.features is None:
        feats = [h for h in header if h not in (schema.group, schema.label)]
    else:
        missing = [f for f in schema.features if f not in col]
        if missing:
            raise SchemaMismatch(f"feature columns {missing} not found in header")
        feats = list(schema.features)
    if not feats:
        raise SchemaMismatch("no feature columns")
    return col, feats


def _parse_common(rows, col, schema, header):
    groups, labels = [], []
    for line, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise ParseError(line, "*", f"expected {len(header)} fields, found {len(r)}")
        g = r[col[schema.group]].strip()
        if not g:
            raise ParseError(line, schema.group, "missing value")
        raw = r[col[schema.label]].strip()
        if not raw:
            raise ParseError(line, schema.label, "missing value")
        try:
            y = float(raw)
        except ValueError:
            raise ParseError(line, schema.label, f"not a number: {raw!r}") from None
        if schema.task == "binary-classification" and y not in (0.0, 1.0):
            raise ParseError(line, schema.label, "classification labels must be 0 or 1")
        groups.append(g)
        labels.append(y)
    return groups, labels


def load_csv(path, schema: CsvSchema = CsvSchema()) -> GroupedDataset:
    """Numeric-feature CSV. Each row is tagged with its own group as evaluation group."""
    if schema.text is not None:
        return load_text_csv(path, schema)[0]
    header, rows = _read_rows(path)
    col, feats = _columns(header, schema)
    groups, labels = _parse_common(rows, col, schema, header)
    X = np.empty((len(rows), len(feats)))
    for line, r in enumerate(rows, start=2):
        for j, name in enumerate(feats):
            raw = r[col[name]].strip()
            if not raw:
                raise ParseError(line, name, "missing value")
            try:
                X[line - 2, j] = float(raw)
            except ValueError:
                raise ParseError(line, name, f"not a number: {raw!r}") from None
    return GroupedDataset(X, labels, groups, [{g} for g in groups], task=schema.task, feature_dim=len(feats))


def load_text_csv(path, schema: CsvSchema, tfidf: TfidfSpec | None = None):
    """Text CSV featurised by tf-idf fitted on the whole file. Returns (dataset, vectorizer)."""
    if schema.text is None:
        raise SchemaMismatch("schema has no text column")
    header, rows = _read_rows(path)
    col, _ = _columns(header, schema)
    groups, labels = _parse_common(rows, col, schema, header)
    texts = []
    for line, r in enumerate(rows, start=2):
        t = r[col[schema.text]]
        if not t.strip():
            raise ParseError(line, schema.text, "missing value")
        texts.append(t)
    vec = fit_tfidf(texts, tfidf or TfidfSpec())
    X = vec.transform(texts)
    ds = GroupedDataset(X, labels, groups, [{g} for g in groups], task=schema.task, feature_dim=X.shape[1])
    return ds, vec


def write_csv(dataset: GroupedDataset, path):
    """Write ``group,label,f0..fk`` with shortest round-trip float text."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "label", *(f"f{j}" for j in range(dataset.feature_dim))])
        for g, y, x in zip(dataset.source_groups, dataset.y, dataset.X):
            w.writerow([g, repr(float(y)), *(repr(float(v)) for v in x)])


def train_eval_split(dataset: GroupedDataset, eval_fraction: float, seed: SeedSpec):
    """Group-stratified random split into (training pool, evaluation set)."""
    if not 0.0 < eval_fraction < 1.0:
        raise ValueError("eval_fraction must lie strictly between 0 and 1")
    counts = dataset.counts()
    n_eval = {g: int(round(n * eval_fraction)) for g, n in counts.items()}
    ev_idx, tr_idx = [], []
    for g, n in counts.items():
        canon = dataset.canonical_indices(g)
        perm = seed.generator(g).permutation(n)
        ev_idx.append(canon[np.sort(perm[: n_eval[g]])])
        tr_idx.append(canon[np.sort(perm[n_eval[g]:])])
    evalset = dataset.take(np.concatenate(ev_idx)) if ev_idx else dataset
    pool = dataset.take(np.concatenate(tr_idx)) if tr_idx else dataset
    return pool, evalset
