import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from dataext.core import GroupedDataset, SeedSpec
from dataext.errors import ConfigError, DegenerateDesign, NonConvergence, UnknownGroupIntercept
from dataext.learners import (
    LinearModel,
    TrainConfig,
    cv_losses,
    cv_select_lambda,
    lasso_cd,
    logistic_objective,
    predict,
    soft_threshold,
    stratified_folds,
    train,
)


def regression_data(n=80, d=3, groups=("A", "B"), noise=0.5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    src = [groups[i % len(groups)] for i in range(n)]
    y = X @ rng.normal(size=d) + noise * rng.normal(size=n)
    return GroupedDataset(X, y, src)


def normal_equations(ds, per_group=False, weights=None):
    """Direct weighted least squares on an explicit intercept design."""
    if per_group:
        gs = ds.groups()
        ones = np.array([[1.0 if s == g else 0.0 for g in gs] for s in ds.source_groups])
    else:
        ones = np.ones((len(ds), 1))
    A = np.hstack([ds.X, ones])
    w = np.ones(len(ds)) if weights is None else np.array([weights[g] for g in ds.source_groups])
    theta = np.linalg.solve(A.T @ (w[:, None] * A), A.T @ (w * ds.y))
    return theta[: ds.feature_dim], theta[ds.feature_dim:]


def test_ols_interpolates_noiseless_affine_data():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    y = X @ np.array([1.0, -2.0, 0.5, 3.0]) + 7.0
    m = train(GroupedDataset(X, y, ["A"] * 30), TrainConfig())
    assert np.allclose(m.weights, [1.0, -2.0, 0.5, 3.0], atol=1e-10)
    assert m.intercept("A") == pytest.approx(7.0, abs=1e-10)
    assert np.max(np.abs(m.scores(X, ["A"] * 30) - y)) < 1e-10


@pytest.mark.parametrize("per_group", [False, True])
def test_ols_matches_normal_equations(per_group):
    ds = regression_data(seed=2)
    cfg = TrainConfig(intercept_mode="per-group" if per_group else "shared")
    m = train(ds, cfg)
    w, b = normal_equations(ds, per_group)
    assert np.allclose(m.weights, w, atol=1e-10)
    keys = ds.groups() if per_group else ["*"]
    assert np.allclose([m.intercepts[k] for k in keys], b, atol=1e-10)


def test_weighted_ols_matches_weighted_normal_equations():
    ds = regression_data(seed=3)
    weights = {"A": 1.0, "B": 0.01}
    m = train(ds, TrainConfig(group_weights=weights))
    w, b = normal_equations(ds, weights=weights)
    assert np.allclose(m.weights, w, atol=1e-10)
    assert m.intercept("A") == pytest.approx(b[0], abs=1e-10)


@pytest.mark.parametrize("per_group", [False, True])
def test_lasso_at_zero_penalty_matches_normal_equations(per_group):
    ds = regression_data(seed=4)
    cfg = TrainConfig(family="lasso", penalty=0.0, intercept_mode="per-group" if per_group else "shared", tol=1e-12)
    m = train(ds, cfg)
    w, _ = normal_equations(ds, per_group)
    assert np.allclose(m.weights, w, atol=1e-6)


def test_lasso_soft_thresholds_on_orthonormal_design():
    rng = np.random.default_rng(5)
    n, d = 200, 4
    Q, _ = np.linalg.qr(rng.normal(size=(n, d)) - rng.normal(size=(n, d)).mean(axis=0))
    X = Q - Q.mean(axis=0)
    X, _ = np.linalg.qr(X)
    X = X * np.sqrt(n)  # columns: mean 0, mean square 1, mutually orthogonal
    assert np.allclose(X.T @ X / n, np.eye(d), atol=1e-10)
    y = X @ np.array([2.0, -0.3, 0.05, 1.0]) + rng.normal(size=n)
    yc = y - y.mean()
    lam = 0.4
    expected = soft_threshold(X.T @ yc / n, lam)
    m = train(GroupedDataset(X, y, ["A"] * n), TrainConfig(family="lasso", penalty=lam, tol=1e-12))
    assert np.allclose(m.weights, expected, atol=1e-8)
    assert np.count_nonzero(m.weights) < d


def test_ridge_matches_standardised_closed_form():
    ds = regression_data(seed=6)
    lam = 0.7
    X, y = ds.X, ds.y
    mu, sd = X.mean(axis=0), X.std(axis=0)
    Z = (X - mu) / sd
    n = len(y)
    beta = np.linalg.solve(Z.T @ Z / n + lam * np.eye(3), Z.T @ (y - y.mean()) / n)
    m = train(ds, TrainConfig(family="ridge", penalty=lam))
    assert np.allclose(m.weights, beta / sd, atol=1e-10)
    assert m.intercept("A") == pytest.approx(y.mean() - mu @ (beta / sd), abs=1e-10)


def test_lasso_objective_never_increases():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = int(rng.integers(1, 8))
        A = rng.normal(size=(50, p)) @ rng.normal(size=(p, p))
        y = rng.normal(size=50)
        gram, xty, yty = A.T @ A / 50, A.T @ y / 50, y @ y / 50
        _, history = lasso_cd(gram, xty, yty, float(rng.uniform(0, 1)), tol=1e-10, max_iter=100_000)
        h = np.array(history)
        assert np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h[:-1])))


def test_lasso_reports_nonconvergence():
    rng = np.random.default_rng(8)
    A = rng.normal(size=(50, 5))
    A[:, 1] = A[:, 0] + 1e-3 * rng.normal(size=50)
    y = rng.normal(size=50)
    with pytest.raises(NonConvergence) as err:
        lasso_cd(A.T @ A / 50, A.T @ y / 50, y @ y / 50, 1e-4, tol=1e-14, max_iter=1)
    assert err.value.max_iter == 1


@pytest.mark.parametrize("family", ["ols", "ridge", "lasso", "logistic"])
def test_uniform_weight_scaling_leaves_model_unchanged(family):
    ds = regression_data(seed=9)
    if family == "logistic":
        ds = GroupedDataset(ds.X, (ds.y > 0).astype(float), ds.source_groups, task="binary-classification")
    base = TrainConfig(family=family, penalty=0.1 if family != "ols" else 0.0, tol=1e-12)
    scaled = TrainConfig(family=family, penalty=base.penalty, tol=1e-12, group_weights={"A": 3.0, "B": 3.0})
    m1, m2 = train(ds, base), train(ds, scaled)
    assert np.allclose(m1.weights, m2.weights, atol=1e-8)
    assert m1.intercept("A") == pytest.approx(m2.intercept("A"), abs=1e-8)


def classification_data(n=120, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    p = 1 / (1 + np.exp(-(X @ np.array([1.5, -1.0, 0.5]) + 0.3)))
    y = (rng.random(n) < p).astype(float)
    return GroupedDataset(X, y, ["A" if i % 3 else "B" for i in range(n)], task="binary-classification")


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(10)
    for _ in range(20):
        n, p = 40, 5
        design = rng.normal(size=(n, p))
        y = (rng.random(n) < 0.5).astype(float)
        w = rng.uniform(0.5, 2, size=n)
        pen = np.r_[np.ones(p - 1), 0.0]
        theta = rng.normal(size=p)
        lam = float(rng.uniform(0, 1))
        _, grad = logistic_objective(theta, design, y, w, lam, pen)
        h = 1e-6
        fd = np.array([
            (logistic_objective(theta + h * e, design, y, w, lam, pen)[0]
             - logistic_objective(theta - h * e, design, y, w, lam, pen)[0]) / (2 * h)
            for e in np.eye(p)
        ])
        assert np.max(np.abs(fd - grad) / np.maximum(1.0, np.abs(grad))) < 1e-5


@pytest.mark.parametrize("mode", ["shared", "per-group"])
def test_logistic_matches_generic_optimiser(mode):
    ds = classification_data(seed=11)
    lam = 0.05
    m = train(ds, TrainConfig(family="logistic", penalty=lam, intercept_mode=mode, tol=1e-10, max_iter=100_000))

    X, y = ds.X, ds.y
    mu, sd = X.mean(axis=0), X.std(axis=0)
    Z = (X - mu) / sd
    keys = ["A", "B"] if mode == "per-group" else ["*"]
    onehot = np.array([[1.0 if (k == "*" or k == s) else 0.0 for k in keys] for s in ds.source_groups])

    def f(theta):
        s = Z @ theta[:3] + onehot @ theta[3:]
        return np.mean(np.logaddexp(0, s) - y * s) + 0.5 * lam * theta[:3] @ theta[:3]

    ref = optimize.minimize(f, np.zeros(3 + len(keys)), method="BFGS", options={"gtol": 1e-10}).x
    assert np.allclose(m.weights, ref[:3] / sd, atol=1e-4)
    for i, k in enumerate(keys):
        assert m.intercepts[k] == pytest.approx(ref[3 + i] - mu @ (ref[:3] / sd), abs=1e-4)


def test_single_value_grid_is_returned_without_cv():
    ds = regression_data(n=3)
    cfg = TrainConfig(family="ridge", penalty="cv", lambda_grid=(0.5,))
    assert cv_select_lambda(ds, cfg) == 0.5


def test_cv_prefers_no_penalty_on_noiseless_data():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(60, 1))
    ds = GroupedDataset(X, 3 * X[:, 0] + 1, ["A"] * 60)
    cfg = TrainConfig(family="ridge", penalty="cv", lambda_grid=(0.0, 10.0))
    assert cv_select_lambda(ds, cfg, seed=SeedSpec(0)) == 0.0
    m = train(ds, cfg, SeedSpec(0))
    assert m.lam == 0.0 and m.weights[0] == pytest.approx(3.0, abs=1e-10)


def fold_loss_oracle(ds, folds, lam):
    losses = []
    for f in np.unique(folds):
        tr, va = folds != f, folds == f
        X, y = ds.X[tr], ds.y[tr]
        mu, sd = X.mean(axis=0), X.std(axis=0)
        Z = (X - mu) / sd
        n = len(y)
        beta = np.linalg.solve(Z.T @ Z / n + lam * np.eye(X.shape[1]), Z.T @ (y - y.mean()) / n) / sd
        pred = ds.X[va] @ beta + y.mean() - mu @ beta
        losses.append(np.mean((pred - ds.y[va]) ** 2))
    return float(np.mean(losses))


def test_cv_picks_heavy_penalty_on_pure_noise():
    rng = np.random.default_rng(13)
    ds = GroupedDataset(rng.normal(size=(60, 20)), rng.normal(size=60), ["A"] * 30 + ["B"] * 30)
    cfg = TrainConfig(family="ridge", penalty="cv", lambda_grid=(1e-4, 1e4))
    seed = SeedSpec(3, "cv")
    folds = stratified_folds(ds, 5, seed)
    losses = cv_losses(ds, cfg, seed=seed)
    for lam in (1e-4, 1e4):
        assert losses[lam] == pytest.approx(fold_loss_oracle(ds, folds, lam), rel=1e-10)
    assert losses[1e4] < losses[1e-4]
    assert cv_select_lambda(ds, cfg, seed=seed) == 1e4


def test_stratified_folds_balance_each_group():
    ds = regression_data(n=53, groups=("A", "B", "C"))
    folds = stratified_folds(ds, 5, SeedSpec(0))
    for g in ds.groups():
        per = np.bincount(folds[ds.indices(g)], minlength=5)
        assert per.max() - per.min() <= 1
    assert np.bincount(folds).max() - np.bincount(folds).min() <= 1


def test_cv_tie_goes_to_larger_penalty():
    # constant labels: every grid value has zero loss
    ds = GroupedDataset(np.random.default_rng(0).normal(size=(20, 2)), np.ones(20), ["A"] * 20)
    cfg = TrainConfig(family="ridge", penalty="cv", lambda_grid=(0.1, 1.0, 5.0))
    assert cv_select_lambda(ds, cfg) == 5.0


def test_predict_examples():
    m = LinearModel(np.array([2.0]), {"A": 1.0, "B": -1.0}, "ols")
    assert predict(m, [3.0], "A") == 7.0
    assert predict(m, [3.0], "B") == 5.0
    with pytest.raises(UnknownGroupIntercept):
        predict(m, [3.0], "C")
    shared = LinearModel(np.array([2.0]), {"*": 0.5}, "ols")
    assert predict(shared, [1.0], "anything") == 2.5
    with pytest.raises(ValueError):
        predict(m, [1.0, 2.0], "A")


def test_training_errors():
    with pytest.raises(DegenerateDesign):
        train(GroupedDataset.empty(2), TrainConfig())
    with pytest.raises(ConfigError):
        train(classification_data(), TrainConfig())
    with pytest.raises(ConfigError):
        TrainConfig(family="svm")
    with pytest.raises(ConfigError):
        TrainConfig(penalty=-1.0)
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"family": "ols", "bogus": 1})


def test_constant_feature_gets_zero_weight():
    rng = np.random.default_rng(14)
    X = np.c_[rng.normal(size=30), np.full(30, 4.0)]
    m = train(GroupedDataset(X, X[:, 0] * 2 + 1, ["A"] * 30), TrainConfig())
    assert m.weights[1] == 0.0
    assert m.weights[0] == pytest.approx(2.0, abs=1e-10)


def test_model_and_config_roundtrip():
    m = train(regression_data(), TrainConfig(intercept_mode="per-group"))
    assert LinearModel.from_dict(m.to_dict()) == m
    cfg = TrainConfig(family="lasso", penalty="cv", group_weights={"B": 0.5})
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.fingerprint() == TrainConfig.from_dict(cfg.to_dict()).fingerprint()


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_training_is_deterministic(seed):
    ds = regression_data(n=40, seed=seed % 1000)
    cfg = TrainConfig(family="lasso", penalty="cv", lambda_grid=(0.01, 0.1))
    assert train(ds, cfg, SeedSpec(seed)) == train(ds, cfg, SeedSpec(seed))
