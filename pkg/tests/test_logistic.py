import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sewerdeg.errors import ValidationError
from sewerdeg.models import model_to_dict
from sewerdeg.models.base import sigmoid
from sewerdeg.models.logistic import (
    LogisticConfig,
    LogisticModel,
    SeparationWarning,
    SingularDesignError,
    gradient,
    log_likelihood,
    lr_fit,
    lr_predict_proba,
    significance_code,
    wald_inference,
)

from oracles import central_difference, max_relative_error


def make_data(n=400, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    beta = np.array([-0.5, 2.0, -1.0, 0.5][: d + 1])
    y = (rng.uniform(size=n) < sigmoid(beta[0] + X @ beta[1:])).astype(float)
    return X, y


def test_sigmoid_stable():
    z = np.array([-1e4, -20.0, 0.0, 20.0, 1e4])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = sigmoid(z)
    assert p[2] == 0.5 and p[3] >= 0.999999
    assert p[0] == 0.0 and p[-1] == 1.0


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=20))
def test_sigmoid_matches_formula(z):
    z = np.array(z)
    assert np.allclose(sigmoid(z), 1 / (1 + np.exp(-z)), rtol=1e-12, atol=0)


def test_gradient_matches_finite_differences():
    X, y = make_data()
    Xd = np.hstack([np.ones((len(y), 1)), X])
    beta = np.array([0.3, -0.2, 0.7, 0.1])
    num = central_difference(lambda b: log_likelihood(b, Xd, y), beta, h=1e-5)
    assert max_relative_error(gradient(beta, Xd, y), num) < 1e-5


def test_fit_reaches_tolerance_and_matches_score_equations():
    X, y = make_data()
    m = lr_fit(X, y)
    assert m.converged
    Xd = np.hstack([np.ones((len(y), 1)), X])
    assert np.linalg.norm(gradient(m.coef, Xd, y)) < 1e-8
    assert m.deviance <= m.null_deviance
    assert m.chi2 == pytest.approx(m.null_deviance - m.deviance)
    assert m.chi2_df == 3
    assert np.allclose(m.cov, m.cov.T)
    assert np.all(np.linalg.eigvalsh(m.cov) > 0)


def test_fit_agrees_with_generic_optimizer():
    from scipy.optimize import minimize

    X, y = make_data(seed=2)
    Xd = np.hstack([np.ones((len(y), 1)), X])
    ref = minimize(lambda b: -log_likelihood(b, Xd, y), np.zeros(4), jac=lambda b: -gradient(b, Xd, y),
                   method="BFGS", options={"gtol": 1e-10})
    assert np.allclose(lr_fit(X, y).coef, ref.x, atol=1e-5)


def test_wald_table_arithmetic():
    inf = wald_inference([9.141e-2], [2.795e-3])
    assert inf["z"][0] == pytest.approx(32.70, abs=0.01)
    assert inf["odds_ratio"][0] == pytest.approx(1.0957, abs=5e-4)
    assert inf["or_ci_low"][0] == pytest.approx(1.0898, abs=1e-3)
    assert inf["or_ci_high"][0] == pytest.approx(1.1017, abs=1e-3)
    assert inf["p"][0] == pytest.approx(2 * stats.norm.sf(32.7044), rel=1e-3)


@given(st.floats(-5, 5), st.floats(1e-3, 3))
def test_or_interval_ordered(b, se):
    inf = wald_inference([b], [se])
    assert inf["or_ci_low"][0] <= inf["odds_ratio"][0] <= inf["or_ci_high"][0]
    assert 0 <= inf["p"][0] <= 1


def test_significance_codes():
    assert [significance_code(p) for p in (1e-4, 5e-3, 0.03, 0.07, 0.5)] == ["***", "**", "*", ".", ""]


def test_single_class_rejected():
    X, _ = make_data(50)
    with pytest.raises(ValidationError, match="single class"):
        lr_fit(X, np.zeros(50))


def test_too_few_samples():
    with pytest.raises(ValidationError):
        lr_fit(np.ones((3, 3)), np.array([0, 1, 0]))


def test_collinear_columns_named():
    X, y = make_data()
    X = np.column_stack([X, 2 * X[:, 0]])
    with pytest.raises(SingularDesignError) as err:
        lr_fit(X, y, columns=("a", "b", "c", "twice_a"))
    assert set(err.value.columns) & {"a", "twice_a"}


def test_separation_warns_and_ridge_fallback():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(200, 2))
    y = (X[:, 0] > 0.5).astype(float)
    with pytest.warns(SeparationWarning):
        m = lr_fit(X, y)
    assert m.separation
    with pytest.warns(SeparationWarning):
        r = lr_fit(X, y, LogisticConfig(ridge_fallback=1.0))
    assert r.ridge == 1.0 and abs(r.coef[1]) < abs(m.coef[1])


def test_no_false_separation_on_heavy_tail():
    rng = np.random.default_rng(1)
    x = rng.pareto(1.5, 3000)
    x = x / x.max()
    y = (rng.uniform(size=3000) < sigmoid(-0.5 + 30 * x)).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SeparationWarning)
        lr_fit(x[:, None], y)


def test_predict_and_schema():
    X, y = make_data()
    m = lr_fit(X, y)
    p = lr_predict_proba(m, X)
    assert np.allclose(p, sigmoid(m.coef[0] + X @ m.coef[1:]), rtol=1e-12)
    with pytest.raises(ValidationError, match="schema"):
        m.predict_proba(X[:, :2])


def test_artifact_roundtrip():
    X, y = make_data()
    m = lr_fit(X, y, seed=4)
    d = model_to_dict(m)
    back = LogisticModel.from_dict(d["columns"], d["params"], d["seed"])
    assert np.array_equal(back.coef, m.coef) and back.seed == 4
    rows = d["inference"]["coefficients"]
    assert [r["variable"] for r in rows] == ["intercept", "x0", "x1", "x2"]


def test_quasi_separated_level_flagged():
    rng = np.random.default_rng(5)
    n = 400
    dummy = (np.arange(n) < 15).astype(float)
    x = rng.uniform(size=n)
    y = (rng.uniform(size=n) < sigmoid(-0.5 + 2 * x)).astype(float)
    y[dummy == 1] = 0.0  # the level is pure
    with pytest.warns(SeparationWarning, match="x1"):
        m = lr_fit(np.column_stack([x, dummy]), y)
    assert m.separation and m.coef[2] < -20


def test_collinear_pair_not_flagged():
    rng = np.random.default_rng(6)
    a = rng.uniform(size=1000)
    b = a + 1e-3 * rng.normal(size=1000)
    y = (rng.uniform(size=1000) < sigmoid(-1 + 2 * a)).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SeparationWarning)
        m = lr_fit(np.column_stack([a, b]), y)
    assert not m.separation
