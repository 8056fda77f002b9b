"""Regularised linear training procedures with capacity and reweighting knobs.

Squared-loss families minimise

    (1 / 2W) * sum_i w_i (y_i - x_i . beta - b_{g_i})^2 + penalty(beta)

and logistic minimises the weighted mean log-loss plus ``lam/2 * |beta|^2``,
where ``w_i`` is the weight of the row's source group and ``W = sum w_i``.
Features are standardised internally (weighted mean 0, sd 1) and the penalty
acts on standardised coefficients; intercepts are never penalised.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .core import GroupedDataset, SeedSpec, group_name
from .errors import ConfigError, DegenerateDesign, NonConvergence, UnknownGroupIntercept

FAMILIES = ("ols", "ridge", "lasso", "logistic")
INTERCEPT_MODES = ("shared", "per-group")
SHARED = "*"
DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 2, 10))


@dataclass(frozen=True)
class TrainConfig:
    family: str = "ols"
    penalty: float | str = 0.0
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    intercept_mode: str = "shared"
    group_weights: dict = field(default_factory=dict)
    tol: float = 1e-8
    max_iter: int = 10_000
    cv_folds: int = 5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.intercept_mode not in INTERCEPT_MODES:
            raise ConfigError(f"intercept_mode must be one of {INTERCEPT_MODES}")
        if self.penalty == "cv":
            if not self.lambda_grid:
                raise ConfigError("penalty 'cv' needs a non-empty lambda_grid")
        elif isinstance(self.penalty, str) or not float(self.penalty) >= 0:
            raise ConfigError(f"penalty must be a non-negative number or 'cv', got {self.penalty!r}")
        if any(not float(v) >= 0 for v in self.lambda_grid):
            raise ConfigError("lambda_grid values must be non-negative")
        if any(not float(v) > 0 for v in self.group_weights.values()):
            raise ConfigError("group weights must be positive")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("tol must be positive and max_iter at least 1")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))

    def weight(self, g) -> float:
        return float(self.group_weights.get(g, 1.0))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "penalty": self.penalty if self.penalty == "cv" else float(self.penalty),
            "lambda_grid": list(self.lambda_grid),
            "intercept_mode": self.intercept_mode,
            "group_weights": {g: float(v) for g, v in sorted(self.group_weights.items())},
            "tol": self.tol,
            "max_iter": self.max_iter,
            "cv_folds": self.cv_folds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        d = dict(d)
        if "lambda_grid" in d:
            d["lambda_grid"] = tuple(d["lambda_grid"])
        if "group_weights" in d:
            d["group_weights"] = {str(g): float(v) for g, v in d["group_weights"].items()}
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    intercepts: dict
    family: str
    lam: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercepts", {g: float(v) for g, v in sorted(self.intercepts.items())})
        if SHARED in self.intercepts and len(self.intercepts) != 1:
            raise ValueError("a shared-intercept model has exactly one intercept")

    @property
    def intercept_mode(self) -> str:
        return "shared" if SHARED in self.intercepts else "per-group"

    def intercept(self, g) -> float:
        if SHARED in self.intercepts:
            return self.intercepts[SHARED]
        try:
            return self.intercepts[group_name(g)]
        except KeyError:
            raise UnknownGroupIntercept(g) from None

    def scores(self, X, groups) -> np.ndarray:
        """Vectorised ``w . x + b_g`` for rows ``X`` with source groups ``groups``."""
        X = np.asarray(X, dtype=float)
        out = X @ self.weights
        if SHARED in self.intercepts:
            return out + self.intercepts[SHARED]
        groups = np.asarray(groups, dtype=object)
        b = np.empty(len(out))
        for g in set(groups.tolist()):
            b[groups == g] = self.intercept(g)
        return out + b

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "weights": [float(v) for v in self.weights],
            "intercepts": dict(self.intercepts),
            "lambda": float(self.lam),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.asarray(d["weights"], dtype=float), d["intercepts"], d["family"], float(d.get("lambda", 0.0)))

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


def predict(model: LinearModel, x, g) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.weights.shape[0]:
        raise ValueError(f"expected {model.weights.shape[0]} features, got {x.shape[0]}")
    return float(x @ model.weights + model.intercept(g))


def predict_dataset(model: LinearModel, dataset: GroupedDataset) -> np.ndarray:
    return model.scores(dataset.X, dataset.source_groups)


def soft_threshold(v, lam):
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


# --------------------------------------------------------------------------
# design preparation


@dataclass
class _Design:
    Z: np.ndarray          # standardised (and, for squared loss, group-centred) active columns
    y: np.ndarray          # labels, centred alongside Z for squared loss
    w: np.ndarray          # row weights
    active: np.ndarray     # bool mask of non-constant feature columns
    scale: np.ndarray      # sd of each active column
    keys: list             # intercept keys
    codes: np.ndarray      # row -> index into keys
    x_means: np.ndarray    # (len(keys), d) centring means
    y_means: np.ndarray    # (len(keys),)


def _row_weights(dataset, config):
    table = {g: config.weight(g) for g in dataset.groups()}
    return np.array([table[g] for g in dataset.source_groups], dtype=float)


def _design(dataset: GroupedDataset, config: TrainConfig, center_by_key: bool) -> _Design:
    n, d = len(dataset), dataset.feature_dim
    if n < 1:
        raise DegenerateDesign("cannot train on an empty dataset")
    X, y = dataset.X, dataset.y
    w = _row_weights(dataset, config)
    if config.intercept_mode == "shared":
        keys, codes = [SHARED], np.zeros(n, dtype=np.intp)
    else:
        keys = dataset.groups()
        lookup = {g: i for i, g in enumerate(keys)}
        codes = np.array([lookup[g] for g in dataset.source_groups], dtype=np.intp)

    x_means = np.zeros((len(keys), d))
    y_means = np.zeros(len(keys))
    for k in range(len(keys)):
        m = codes == k
        wk = w[m]
        x_means[k] = wk @ X[m] / wk.sum()
        y_means[k] = wk @ y[m] / wk.sum()

    if center_by_key:
        Xc = X - x_means[codes]
        yc = y - y_means[codes]
    else:
        Xc = X - (w @ X / w.sum())
        yc = y
    W = w.sum()
    sd = np.sqrt(w @ (Xc * Xc) / W)
    span = np.max(np.abs(X), axis=0) if n else np.zeros(d)
    active = sd > 1e-12 * (1.0 + span)
    Z = Xc[:, active] / sd[active]
    return _Design(Z, yc, w, active, sd[active], keys, codes, x_means, y_means)


def _expand(design: _Design, beta, d):
    coef = np.zeros(d)
    coef[design.active] = beta / design.scale
    return coef


# --------------------------------------------------------------------------
# squared loss


def lasso_objective(beta, gram, xty, yty, lam) -> float:
    return 0.5 * yty - xty @ beta + 0.5 * beta @ gram @ beta + lam * np.abs(beta).sum()


def lasso_cd(gram, xty, yty, lam, tol=1e-8, max_iter=10_000):
    """Cyclic coordinate descent on the covariance form of the lasso.

    Minimises ``0.5*yty - xty.b + 0.5*b.G.b + lam*|b|_1``. Returns the
    coefficients and the objective after each full sweep (index 0 is the
    starting point).
    """
    p = len(xty)
    beta = np.zeros(p)
    q = np.zeros(p)  # gram @ beta, maintained incrementally
    diag = np.diag(gram).copy()
    history = [lasso_objective(beta, gram, xty, yty, lam)]
    change = np.inf
    for _ in range(max_iter):
        change = 0.0
        for j in range(p):
            if diag[j] <= 0:
                continue
            rho = xty[j] - q[j] + diag[j] * beta[j]
            new = soft_threshold(rho, lam) / diag[j]
            step = new - beta[j]
            if step != 0.0:
                q += step * gram[:, j]
                beta[j] = new
                change = max(change, abs(step))
        history.append(0.5 * yty - xty @ beta + 0.5 * beta @ q + lam * np.abs(beta).sum())
        if change < tol:
            return beta, history
    raise NonConvergence(max_iter, beta, change)


def _fit_squared(dataset, config, lam) -> LinearModel:
    dz = _design(dataset, config, center_by_key=True)
    W = dz.w.sum()
    p = dz.Z.shape[1]
    if p == 0:
        beta = np.zeros(0)
    elif config.family == "ols":
        sw = np.sqrt(dz.w)
        beta = np.linalg.lstsq(sw[:, None] * dz.Z, sw * dz.y, rcond=None)[0]
    else:
        gram = dz.Z.T @ (dz.w[:, None] * dz.Z) / W
        xty = dz.Z.T @ (dz.w * dz.y) / W
        if config.family == "ridge":
            beta = np.linalg.solve(gram + lam * np.eye(p), xty)
        else:
            yty = dz.w @ (dz.y * dz.y) / W
            beta, _ = lasso_cd(gram, xty, yty, lam, config.tol, config.max_iter)
    coef = _expand(dz, beta, dataset.feature_dim)
    intercepts = {k: float(dz.y_means[i] - dz.x_means[i] @ coef) for i, k in enumerate(dz.keys)}
    return LinearModel(coef, intercepts, config.family, 0.0 if config.family == "ols" else lam)


# --------------------------------------------------------------------------
# logistic loss


def logistic_objective(theta, design, y, weights, lam, penalized):
    """Weighted mean log-loss plus ``lam/2`` times the squared norm of the
    penalised entries of ``theta``. Returns ``(loss, gradient)``."""
    s = design @ theta
    W = weights.sum()
    loss = weights @ (np.logaddexp(0.0, s) - y * s) / W
    r = weights * (_sigmoid(s) - y) / W
    pen = theta * penalized
    return loss + 0.5 * lam * pen @ pen, design.T @ r + lam * pen


def _sigmoid(s):
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def gradient_descent(fun, theta0, tol=1e-8, max_iter=10_000):
    """Gradient descent with Armijo backtracking. ``fun`` returns (value, grad)."""
    theta = np.array(theta0, dtype=float)
    f, g = fun(theta)
    step = 1.0
    change = np.inf
    for _ in range(max_iter):
        step = min(step * 2.0, 1e6)
        gg = g @ g
        while True:
            cand = theta - step * g
            fc, gc = fun(cand)
            if fc <= f - 0.5 * step * gg or step < 1e-30:
                break
            step *= 0.5
        change = float(np.max(np.abs(cand - theta))) if theta.size else 0.0
        theta, f, g = cand, fc, gc
        if change < tol:
            return theta
    raise NonConvergence(max_iter, theta, change)


def _fit_logistic(dataset, config, lam) -> LinearModel:
    y = dataset.y
    if not np.all((y == 0) | (y == 1)):
        raise ConfigError("logistic regression needs 0/1 labels")
    dz = _design(dataset, config, center_by_key=False)
    onehot = np.zeros((len(y), len(dz.keys)))
    onehot[np.arange(len(y)), dz.codes] = 1.0
    design = np.hstack([dz.Z, onehot])
    p = dz.Z.shape[1]
    penalized = np.r_[np.ones(p), np.zeros(len(dz.keys))]
    theta = gradient_descent(
        lambda t: logistic_objective(t, design, y, dz.w, lam, penalized),
        np.zeros(design.shape[1]),
        config.tol,
        config.max_iter,
    )
    coef = _expand(dz, theta[:p], dataset.feature_dim)
    center = dz.w @ dataset.X / dz.w.sum()
    offset = center @ coef
    intercepts = {k: float(theta[p + i] - offset) for i, k in enumerate(dz.keys)}
    return LinearModel(coef, intercepts, "logistic", lam)


def _fit(dataset, config, lam) -> LinearModel:
    if config.family == "logistic":
        return _fit_logistic(dataset, config, lam)
    return _fit_squared(dataset, config, lam)


# --------------------------------------------------------------------------
# public entry points


def train(dataset: GroupedDataset, config: TrainConfig, seed: SeedSpec | None = None) -> LinearModel:
    """Fit ``config``'s procedure to ``dataset``. ``seed`` only drives CV folds."""
    if len(dataset) < 1:
        raise DegenerateDesign("cannot train on an empty dataset")
    if dataset.task == "binary-classification" and config.family != "logistic":
        raise ConfigError("classification datasets must be trained with family 'logistic'")
    if config.penalty == "cv":
        lam = cv_select_lambda(dataset, config, seed=seed)
    else:
        lam = float(config.penalty)
    return _fit(dataset, config, lam)


def stratified_folds(dataset: GroupedDataset, k: int, seed: SeedSpec) -> np.ndarray:
    """Fold id per row; each source group is spread round-robin over the folds."""
    folds = np.empty(len(dataset), dtype=np.intp)
    offset = 0
    for g in dataset.groups():
        ix = dataset.canonical_indices(g)
        perm = seed.generator(g).permutation(len(ix))
        folds[ix[perm]] = (np.arange(len(ix)) + offset) % k
        offset += len(ix)
    return folds


def validation_loss(model: LinearModel, dataset: GroupedDataset, config: TrainConfig) -> float:
    s = predict_dataset(model, dataset)
    w = _row_weights(dataset, config)
    if model.family == "logistic":
        per_row = np.logaddexp(0.0, s) - dataset.y * s
    else:
        per_row = (s - dataset.y) ** 2
    return float(w @ per_row / w.sum())


def cv_losses(dataset, config, k=None, seed=None) -> dict:
    """Mean validation loss over ``k`` group-stratified folds for each grid value."""
    k = k or config.cv_folds
    if k < 2:
        raise ConfigError("need at least 2 folds")
    if len(dataset) < k:
        raise DegenerateDesign(f"{len(dataset)} instances cannot fill {k} folds")
    folds = stratified_folds(dataset, k, seed or SeedSpec(0, "cv"))
    splits = []
    for f in range(k):
        va = folds == f
        if va.any():
            splits.append((dataset.take(np.flatnonzero(~va)), dataset.take(np.flatnonzero(va))))
    out = {}
    for lam in sorted(set(config.lambda_grid), reverse=True):
        out[lam] = float(np.mean([validation_loss(_fit(tr, config, lam), va, config) for tr, va in splits]))
    return out


def cv_select_lambda(dataset, config, k=None, seed=None) -> float:
    """Grid value with the lowest mean fold loss; exact ties go to the larger value."""
    grid = sorted(set(config.lambda_grid), reverse=True)
    if len(grid) == 1:
        return grid[0]
    best_lam, best = None, np.inf
    for lam, loss in cv_losses(dataset, config, k, seed).items():
        if loss < best:
            best_lam, best = lam, loss
    if best_lam is None:
        raise NonConvergence(0, None, float("nan"))
    return best_lam
