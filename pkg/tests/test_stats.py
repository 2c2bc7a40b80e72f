import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from dagloop.stats import (
    RankDeficientError,
    delta_bic,
    fdr_adjust,
    fit_logit,
    fit_node,
    fit_ols,
    residual_correlation,
    vif,
)
from dagloop.synthetic import to_dataset

from oracles import bh_by_definition, ols_normal_equations


def ds_of(**cols):
    names = list(cols)
    return to_dataset(cols, names[0], names[-1])


def test_ols_exact_fit():
    x = np.arange(10.0)
    fit = fit_ols(2 * x, x, ["x"])
    assert fit.r2 == pytest.approx(1.0)
    assert fit.coef("x") == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.bic < -300  # residuals are rounding noise


def test_ols_rank_deficiency_names_columns():
    x = np.random.default_rng(0).standard_normal(50)
    with pytest.raises(RankDeficientError) as err:
        fit_ols(x + 1, np.column_stack([x, x]), ["a", "b"])
    assert {"a", "b"} <= set(err.value.columns)


def test_ols_matches_normal_equations():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((200, 3))
    y = X @ [1.0, -0.5, 0.2] + rng.standard_normal(200)
    fit = fit_ols(y, X)
    ref = ols_normal_equations(y, X)
    np.testing.assert_allclose(fit.params, ref["params"], rtol=1e-10)
    assert fit.r2 == pytest.approx(ref["r2"], rel=1e-10)
    assert fit.bic == pytest.approx(ref["bic"], rel=1e-10)
    assert fit.adj_r2 <= fit.r2


def test_ols_standard_errors_match_textbook_formula():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((80, 2))
    y = X @ [0.3, 0.0] + rng.standard_normal(80)
    fit = fit_ols(y, X)
    D = np.column_stack([np.ones(80), X])
    resid = y - D @ fit.params
    sigma2 = resid @ resid / (80 - 3)
    se = np.sqrt(np.diag(np.linalg.inv(D.T @ D)) * sigma2)
    np.testing.assert_allclose(fit.bse, se, rtol=1e-9)
    t = fit.params / se
    np.testing.assert_allclose(fit.pvalues, 2 * sps.t.sf(np.abs(t), 77), rtol=1e-9)


def test_ols_joint_p_is_uniform_under_null():
    ps = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, 1000))
        fit = fit_ols(y, x)
        assert fit.r2 < 0.02
        ps.append(fit.joint_p)
    assert sps.kstest(ps, "uniform").pvalue > 0.01


def test_ols_intercept_only():
    fit = fit_ols(np.array([1.0, 2.0, 3.0]), None)
    assert fit.r2 == 0.0 and fit.joint_p == 1.0 and fit.names == []


def test_logit_recovers_slope():
    slopes = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(5000)
        y = (rng.random(5000) < 1 / (1 + np.exp(-x))).astype(float)
        fit = fit_logit(y, x)
        assert fit.converged
        slopes.append(fit.coef("x1"))
    assert abs(np.median(slopes) - 1.0) <= 0.15


def test_logit_separation_does_not_converge():
    x = np.linspace(-2, 2, 40)
    fit = fit_logit((x > 0).astype(float), x)
    assert not fit.converged


def test_logit_uninformative_pseudo_r2():
    r2 = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(2000)
        y = (rng.random(2000) < 0.4).astype(float)
        r2.append(fit_logit(y, x).r2)
    assert np.median(r2) < 0.01


def test_logit_bic_and_loglik_consistent():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(500)
    y = (rng.random(500) < 1 / (1 + np.exp(-0.5 * x))).astype(float)
    fit = fit_logit(y, x)
    eta = fit.params[0] + fit.params[1] * x
    ll = float(np.sum(y * eta - np.logaddexp(0, eta)))
    assert fit.loglik == pytest.approx(ll, rel=1e-9)
    assert fit.bic == pytest.approx(-2 * ll + 2 * math.log(500), rel=1e-9)
    # score equations vanish at the MLE
    p = 1 / (1 + np.exp(-eta))
    assert abs(np.sum(y - p)) < 1e-6 and abs(np.sum((y - p) * x)) < 1e-6


def test_fit_node_picks_model_kind():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(300)
    b = (x + rng.standard_normal(300) > 0).astype(float)
    ds = ds_of(x=x, b=b)
    assert fit_node(ds, "b", ["x"]).model_kind == "logit"
    assert fit_node(ds, "x", ["b"]).model_kind == "ols"


def test_residual_correlation_cases():
    rng = np.random.default_rng(3)
    p = rng.standard_normal(1000)
    o = rng.standard_normal(1000)
    c = p + rng.standard_normal(1000)
    ds = ds_of(p=p, o=o, c=c, k=np.ones(1000))
    rho, ok = residual_correlation("c", "p", [], ds)
    assert ok and rho == pytest.approx(np.corrcoef(c, p)[0, 1], abs=1e-12)
    rho_o, _ = residual_correlation("c", "p", ["o"], ds)
    assert abs(rho_o - rho) < 0.05
    assert residual_correlation("c", "k", [], ds) == (0.0, False)


def test_delta_bic_is_antisymmetric_and_matches_rss_identity():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(1000)
    y = x + rng.standard_normal(1000)
    ds = ds_of(x=x, y=y)
    d = delta_bic("x", "y", ds)
    assert delta_bic("y", "x", ds) == pytest.approx(-d)
    fwd = ols_normal_equations(y, x)["bic"]
    rev = ols_normal_equations(x, y)["bic"]
    assert d == pytest.approx(rev - fwd, rel=1e-9)


def test_delta_bic_independent_sign_is_symmetric():
    # with independent columns the sign only tracks which sample variance is larger
    big = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, 1000))
        d = delta_bic("x", "y", ds_of(x=x, y=y))
        assert d == pytest.approx(1000 * math.log(x.var() / y.var()), abs=0.1)
        big += d > 2
    assert 30 <= big <= 70


def test_delta_bic_nan_when_model_does_not_converge():
    x = np.linspace(-2, 2, 40)
    ds = ds_of(x=x, b=(x > 0).astype(float))
    assert math.isnan(delta_bic("x", "b", ds))


def test_vif_cases():
    rng = np.random.default_rng(6)
    a, b, c = rng.standard_normal((3, 1000))
    ds = ds_of(a=a, b=b, c=c, d=2 * a)
    assert vif(["a"], ds) == {"a": 1.0}
    assert vif(["a", "d"], ds) == {"a": math.inf, "d": math.inf}
    assert max(vif(["a", "b", "c"], ds).values()) < 1.2
    r2 = fit_ols(a, np.column_stack([b, c])).r2
    assert vif(["a", "b", "c"], ds)["a"] == pytest.approx(1 / (1 - r2), rel=1e-9)


def test_fdr_examples():
    assert fdr_adjust([0.01, 0.02, 0.03]) == pytest.approx([0.03, 0.03, 0.03])
    assert fdr_adjust([0.2]) == [0.2]
    assert fdr_adjust([0.4] * 4) == pytest.approx([0.4] * 4)
    assert fdr_adjust([]) == []
    with pytest.raises(ValueError):
        fdr_adjust([1.5])


pvals = st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=30)


@given(pvals)
def test_fdr_matches_definition_and_scipy(p):
    adj = fdr_adjust(p)
    assert adj == bh_by_definition(p)
    np.testing.assert_allclose(adj, sps.false_discovery_control(p, method="bh"), rtol=1e-12, atol=1e-300)


@given(pvals)
def test_fdr_properties(p):
    adj = np.array(fdr_adjust(p))
    assert (adj >= np.array(p) - 1e-15).all() and (adj <= 1).all()
    order = np.argsort(p, kind="stable")
    assert (np.diff(adj[order]) >= -1e-15).all()
