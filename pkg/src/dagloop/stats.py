"""Regression fits and the scalar statistics used to score a DAG.

All models include an intercept, which is never reported as an edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special
from scipy import stats as sps

from .data import PanelDataset

LOGIT_MAX_ITER = 100
LOGIT_TOL = 1e-8


class RegressionError(ValueError):
    pass


class RankDeficientError(RegressionError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"rank-deficient design; linearly dependent columns: {columns}")


@dataclass
class RegressionFit:
    model_kind: str  # "ols" | "logit"
    names: list[str]
    params: np.ndarray  # intercept first
    bse: np.ndarray
    pvalues: np.ndarray
    r2: float
    adj_r2: float
    joint_p: float
    bic: float
    loglik: float
    n: int
    converged: bool

    @property
    def intercept(self) -> float:
        return float(self.params[0])

    @property
    def coefficients(self) -> np.ndarray:
        return self.params[1:]

    @property
    def std_errors(self) -> np.ndarray:
        return self.bse[1:]

    @property
    def per_coef_p(self) -> np.ndarray:
        return self.pvalues[1:]

    def coef(self, name: str) -> float:
        return float(self.params[1 + self.names.index(name)])

    def pvalue(self, name: str) -> float:
        return float(self.pvalues[1 + self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "regressors": list(self.names),
            "intercept": self.intercept,
            "coefficients": dict(zip(self.names, map(float, self.coefficients))),
            "std_errors": dict(zip(self.names, map(float, self.std_errors))),
            "p_values": dict(zip(self.names, map(float, self.per_coef_p))),
            "r2": self.r2,
            "adj_r2": self.adj_r2,
            "joint_p": self.joint_p,
            "bic": self.bic,
            "n": self.n,
            "converged": self.converged,
        }


def _design(X: np.ndarray | None, n: int) -> np.ndarray:
    if X is None:
        return np.ones((n, 1))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(n), X])


def _names(names: Sequence[str] | None, p: int) -> list[str]:
    if names is None:
        return [f"x{i}" for i in range(1, p + 1)]
    if len(names) != p:
        raise RegressionError(f"{len(names)} names for {p} regressors")
    return list(names)


def _check_rank(s: np.ndarray, vt: np.ndarray, shape: tuple[int, int], names: list[str]) -> int:
    tol = s.max() * max(shape) * np.finfo(float).eps
    rank = int((s > tol).sum())
    if rank < shape[1]:
        null = np.abs(vt[rank:])
        involved = np.nonzero((null > 1e-8).any(axis=0))[0]
        labels = ["const"] + names
        raise RankDeficientError([labels[i] for i in involved])
    return rank


def _clean_p(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.clip(np.where(np.isnan(p), 1.0, p), 0.0, 1.0)


def fit_ols(y: np.ndarray, X: np.ndarray | None, names: Sequence[str] | None = None) -> RegressionFit:
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    D = _design(X, n)
    p = D.shape[1] - 1
    names = _names(names, p)
    if n <= p + 1:
        raise RegressionError(f"need n > p + 1, got n={n}, p={p}")
    u, s, vt = np.linalg.svd(D, full_matrices=False)
    _check_rank(s, vt, D.shape, names)
    beta = vt.T @ ((u.T @ y) / s)
    resid = y - D @ beta
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    dof = n - p - 1
    sigma2 = rss / dof
    cov_unscaled = (vt.T / s**2) @ vt
    bse = np.sqrt(sigma2 * np.diag(cov_unscaled))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = beta / bse
        pvals = 2.0 * sps.t.sf(np.abs(tvals), dof)
        r2 = min(max(1.0 - rss / tss, 0.0), 1.0) if tss > 0 else 0.0
        if p == 0 or tss == 0:
            joint_p = 1.0
        else:
            fstat = ((tss - rss) / p) / (rss / dof)
            joint_p = float(sps.f.sf(fstat, p, dof))
        bic = n * math.log(rss / n) + (p + 1) * math.log(n) if rss > 0 else -math.inf
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof
    loglik = -0.5 * n * (math.log(2 * math.pi * rss / n) + 1) if rss > 0 else math.inf
    return RegressionFit(
        model_kind="ols",
        names=names,
        params=beta,
        bse=bse,
        pvalues=_clean_p(pvals),
        r2=r2,
        adj_r2=adj_r2,
        joint_p=float(_clean_p(joint_p)),
        bic=bic,
        loglik=loglik,
        n=n,
        converged=True,
    )


def _logit_loglik(y: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logit(
    y: np.ndarray,
    X: np.ndarray | None,
    names: Sequence[str] | None = None,
    max_iter: int = LOGIT_MAX_ITER,
    tol: float = LOGIT_TOL,
) -> RegressionFit:
    """Maximum likelihood logistic regression by Newton-Raphson (IRLS).

    Convergence requires the log-likelihood change to fall below ``tol`` with a
    negligible parameter step; under (quasi-)separation the coefficients keep
    growing, so the fit runs out of iterations and is returned with
    ``converged=False``.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if not np.isin(y, (0.0, 1.0)).all():
        raise RegressionError("logit response must be 0/1")
    if y.min() == y.max():
        raise RegressionError("logit response has a single class")
    D = _design(X, n)
    p = D.shape[1] - 1
    names = _names(names, p)
    if n <= p + 1:
        raise RegressionError(f"need n > p + 1, got n={n}, p={p}")
    _, s, vt = np.linalg.svd(D, full_matrices=False)
    _check_rank(s, vt, D.shape, names)

    beta = np.zeros(p + 1)
    ll = _logit_loglik(y, D @ beta)
    converged = False
    for _ in range(max_iter):
        mu = special.expit(D @ beta)
        w = mu * (1.0 - mu)
        grad = D.T @ (y - mu)
        hess = (D * w[:, None]).T @ D
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            ll_new = _logit_loglik(y, D @ cand)
            if ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        delta = cand - beta
        beta, ll_old, ll = cand, ll, ll_new
        if abs(ll - ll_old) < tol and np.max(np.abs(delta)) < 1e-6 * (1.0 + np.max(np.abs(beta))):
            converged = True
            break

    mu = special.expit(D @ beta)
    w = mu * (1.0 - mu)
    hess = (D * w[:, None]).T @ D
    try:
        cov = np.linalg.inv(hess)
        bse = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        bse = np.full(p + 1, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        pvals = 2.0 * sps.norm.sf(np.abs(beta / bse))
    ybar = y.mean()
    ll0 = n * (ybar * math.log(ybar) + (1 - ybar) * math.log(1 - ybar))
    r2 = 1.0 - ll / ll0
    adj_r2 = 1.0 - (ll - p) / ll0
    lr = max(2.0 * (ll - ll0), 0.0)
    joint_p = float(sps.chi2.sf(lr, p)) if p > 0 else 1.0
    return RegressionFit(
        model_kind="logit",
        names=names,
        params=beta,
        bse=bse,
        pvalues=_clean_p(pvals),
        r2=r2,
        adj_r2=adj_r2,
        joint_p=joint_p,
        bic=-2.0 * ll + (p + 1) * math.log(n),
        loglik=ll,
        n=n,
        converged=converged,
    )


def fit_node(ds: PanelDataset, response: str, regressors: Sequence[str]) -> RegressionFit:
    """Logit when the response column is binary, OLS otherwise."""
    X = ds.matrix(regressors) if regressors else None
    fit = fit_logit if ds.is_binary(response) else fit_ols
    return fit(ds.column(response), X, list(regressors))


def _residualize(v: np.ndarray, Z: np.ndarray | None) -> np.ndarray:
    if Z is None:
        return v - v.mean()
    D = _design(Z, v.shape[0])
    coef, *_ = np.linalg.lstsq(D, v, rcond=None)
    return v - D @ coef


def residual_correlation(
    child: str, parent: str, other_parents: Iterable[str], ds: PanelDataset
) -> tuple[float, bool]:
    """Partial correlation of child and parent given the other parents.

    Returns ``(rho, defined)``; ``rho`` is 0 when either residual has no variance.
    """
    others = [o for o in other_parents]
    Z = ds.matrix(others) if others else None
    rc = _residualize(ds.column(child), Z)
    rp = _residualize(ds.column(parent), Z)
    ssc, ssp = float(rc @ rc), float(rp @ rp)
    scale_c = float(ds.column(child) @ ds.column(child))
    scale_p = float(ds.column(parent) @ ds.column(parent))
    if ssc <= 1e-18 * max(scale_c, 1e-300) or ssp <= 1e-18 * max(scale_p, 1e-300):
        return 0.0, False
    rho = float(rc @ rp) / math.sqrt(ssc * ssp)
    return min(max(rho, -1.0), 1.0), True


def delta_bic(parent: str, child: str, ds: PanelDataset) -> float:
    """BIC(parent ~ child) - BIC(child ~ parent); positive favours parent -> child.

    NaN when either bivariate model cannot be fitted or does not converge.
    """
    try:
        forward = fit_node(ds, child, [parent])
        reverse = fit_node(ds, parent, [child])
    except RegressionError:
        return math.nan
    if not (forward.converged and reverse.converged):
        return math.nan
    return reverse.bic - forward.bic


def vif(parents: Sequence[str], ds: PanelDataset) -> dict[str, float]:
    """Variance inflation factor of each parent; ``inf`` under perfect collinearity."""
    parents = list(parents)
    if len(parents) == 1:
        return {parents[0]: 1.0}
    out = {}
    for j, p in enumerate(parents):
        target = ds.column(p)
        tss = float(((target - target.mean()) ** 2).sum())
        if tss == 0:
            out[p] = math.inf
            continue
        resid = _residualize(target, ds.matrix(parents[:j] + parents[j + 1:]))
        unexplained = float(resid @ resid) / tss
        out[p] = math.inf if unexplained <= 1e-10 else 1.0 / min(unexplained, 1.0)
    return out


def fdr_adjust(p: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return []
    if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adj_sorted
    return out.tolist()
