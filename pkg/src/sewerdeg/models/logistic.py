"""Logistic regression fitted by IRLS, with Wald inference and odds ratios."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from sewerdeg.errors import NumericalError, ValidationError
from sewerdeg.models.base import Classifier, as_xy, check_binary, sigmoid

log = logging.getLogger(__name__)


class SeparationWarning(UserWarning):
    """Coefficients diverge; the data are (quasi-)separated."""


class SingularDesignError(NumericalError):
    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(f"singular information matrix; collinear columns: {', '.join(self.columns)}")


@dataclass(frozen=True)
class LogisticConfig:
    max_iter: int = 100
    tol: float = 1e-8
    divergence_bound: float = 20.0
    # ridge penalty used to refit when separation is detected; None disables
    ridge_fallback: float | None = None
    alpha: float = 0.05


def log_likelihood(beta, Xd, y) -> float:
    """Bernoulli log-likelihood; ``Xd`` already carries the intercept column."""
    eta = Xd @ beta
    # y*eta - log(1 + e^eta), computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def gradient(beta, Xd, y) -> np.ndarray:
    return Xd.T @ (y - sigmoid(Xd @ beta))


def fisher_information(beta, Xd) -> np.ndarray:
    p = sigmoid(Xd @ beta)
    w = p * (1.0 - p)
    return (Xd * w[:, None]).T @ Xd


def significance_code(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


def wald_inference(coef, se, alpha: float = 0.05) -> dict:
    """z statistics, two-sided p values, odds ratios and their Wald intervals."""
    coef = np.asarray(coef, dtype=np.float64)
    se = np.asarray(se, dtype=np.float64)
    z = coef / se
    crit = stats.norm.ppf(1 - alpha / 2)
    return {
        "z": z,
        "p": 2.0 * stats.norm.sf(np.abs(z)),
        "odds_ratio": np.exp(coef),
        "or_ci_low": np.exp(coef - crit * se),
        "or_ci_high": np.exp(coef + crit * se),
        "ci_low": coef - crit * se,
        "ci_high": coef + crit * se,
    }


def _collinear_columns(Xd, names) -> list[str]:
    _, r, piv = linalg.qr(Xd, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(Xd.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    return [names[j] for j in piv[rank:]]


@dataclass(frozen=True)
class LogisticModel(Classifier):
    name = "lr"
    columns: tuple[str, ...]
    coef: np.ndarray  # intercept first
    cov: np.ndarray
    deviance: float
    null_deviance: float
    n_obs: int
    n_iter: int = 0
    converged: bool = True
    separation: bool = False
    ridge: float = 0.0
    alpha: float = 0.05
    seed: int | None = None

    @property
    def names(self) -> tuple[str, ...]:
        return ("intercept",) + tuple(self.columns)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def chi2(self) -> float:
        return self.null_deviance - self.deviance

    @property
    def chi2_df(self) -> int:
        return len(self.columns)

    @property
    def chi2_p(self) -> float:
        return float(stats.chi2.sf(self.chi2, self.chi2_df))

    def coefficient(self, column: str) -> float:
        return float(self.coef[self.names.index(column)])

    def inference(self) -> dict:
        return wald_inference(self.coef, self.se, self.alpha)

    def inference_table(self) -> list[dict]:
        inf = self.inference()
        rows = []
        for j, name in enumerate(self.names):
            rows.append(
                {
                    "variable": name,
                    "estimate": float(self.coef[j]),
                    "std_error": float(self.se[j]),
                    "z": float(inf["z"][j]),
                    "p": float(inf["p"][j]),
                    "significance": significance_code(float(inf["p"][j])),
                    "odds_ratio": float(inf["odds_ratio"][j]),
                    "or_ci_low": float(inf["or_ci_low"][j]),
                    "or_ci_high": float(inf["or_ci_high"][j]),
                }
            )
        return rows

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return self.coef[0] + X @ self.coef[1:]

    def _proba(self, X):
        return sigmoid(self.coef[0] + X @ self.coef[1:])

    def to_dict(self) -> dict:
        return {
            "coef": self.coef.tolist(),
            "cov": self.cov.tolist(),
            "deviance": self.deviance,
            "null_deviance": self.null_deviance,
            "n_obs": self.n_obs,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "separation": self.separation,
            "ridge": self.ridge,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, columns, params, seed=None) -> "LogisticModel":
        return cls(
            columns=tuple(columns),
            coef=np.asarray(params["coef"], dtype=np.float64),
            cov=np.asarray(params["cov"], dtype=np.float64),
            deviance=float(params["deviance"]),
            null_deviance=float(params["null_deviance"]),
            n_obs=int(params["n_obs"]),
            n_iter=int(params["n_iter"]),
            converged=bool(params["converged"]),
            separation=bool(params["separation"]),
            ridge=float(params["ridge"]),
            alpha=float(params["alpha"]),
            seed=seed,
        )


def _diverging(beta, Xd, y, bound: float, flat: float = 1e-2) -> np.ndarray:
    """Coefficients beyond ``bound`` along which the likelihood is flat.

    Under separation the supremum lies at infinity: doubling the whole
    vector (complete separation) or one diverged coefficient (a level that
    is pure in one class) barely changes the log-likelihood.  A large but
    finite estimate, e.g. from collinear columns, loses a lot instead.
    """
    large = np.abs(beta) > bound
    if not large.any():
        return large
    ll = log_likelihood(beta, Xd, y)
    if ll - log_likelihood(2.0 * beta, Xd, y) < flat:
        return large
    out = np.zeros(len(beta), dtype=bool)
    for j in np.nonzero(large)[0]:
        b2 = beta.copy()
        b2[j] *= 2.0
        out[j] = ll - log_likelihood(b2, Xd, y) < flat
    return out


def _irls(Xd, y, cfg: LogisticConfig, ridge: float):
    p = Xd.shape[1]
    pen = np.full(p, ridge)
    pen[0] = 0.0
    beta = np.zeros(p)
    ll = log_likelihood(beta, Xd, y) - 0.5 * np.sum(pen * beta**2)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g = gradient(beta, Xd, y) - pen * beta
        if np.linalg.norm(g) < cfg.tol:
            converged = True
            it -= 1
            break
        H = fisher_information(beta, Xd) + np.diag(pen)
        try:
            step = linalg.cho_solve(linalg.cho_factor(H), g)
        except linalg.LinAlgError:
            step = linalg.lstsq(H, g)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = log_likelihood(cand, Xd, y) - 0.5 * np.sum(pen * cand**2)
            if ll_new >= ll - 1e-12 * abs(ll) or t < 1e-10:
                break
            t *= 0.5
        beta, ll = cand, ll_new
        if not np.all(np.isfinite(beta)):
            raise NumericalError("IRLS produced non-finite coefficients")
    else:
        g = gradient(beta, Xd, y) - pen * beta
        converged = bool(np.linalg.norm(g) < cfg.tol)
    H = fisher_information(beta, Xd) + np.diag(pen)
    return beta, H, it, converged


def lr_fit(X, y=None, config: LogisticConfig = LogisticConfig(), columns=None, seed=None) -> LogisticModel:
    """Maximum-likelihood logistic regression.

    Newton/IRLS from zero until the gradient norm drops below ``config.tol``.
    The covariance is the inverse Fisher information at the estimate.
    """
    X, y, cols = as_xy(X, y)
    if columns is not None:
        cols = tuple(columns)
    y = check_binary(y)
    n, d = X.shape
    if n <= d:
        raise ValidationError(f"need more samples than features (n={n}, d={d})")
    if y.min() == y.max():
        raise ValidationError("degenerate fit: training labels contain a single class")
    Xd = np.hstack([np.ones((n, 1)), X])
    names = ("intercept",) + tuple(cols)
    bad = _collinear_columns(Xd, names)
    if bad:
        raise SingularDesignError(bad)

    beta, H, n_iter, converged = _irls(Xd, y, config, 0.0)
    ridge = 0.0
    diverging = _diverging(beta, Xd, y, config.divergence_bound)
    separation = bool(diverging.any())
    if separation:
        worst = names[int(np.argmax(np.where(diverging, np.abs(beta), -1.0)))]
        warnings.warn(
            f"coefficient for {worst} exceeds {config.divergence_bound}; possible separation",
            SeparationWarning,
            stacklevel=2,
        )
        if config.ridge_fallback:
            ridge = float(config.ridge_fallback)
            beta, H, n_iter, converged = _irls(Xd, y, config, ridge)
    if not converged:
        log.warning("IRLS did not converge in %d iterations", config.max_iter)
    try:
        cov = linalg.inv(H)
    except linalg.LinAlgError as exc:
        raise SingularDesignError(_collinear_columns(Xd, names) or names) from exc
    cov = 0.5 * (cov + cov.T)

    ybar = y.mean()
    null_ll = float(n * (ybar * np.log(ybar) + (1 - ybar) * np.log(1 - ybar)))
    return LogisticModel(
        columns=tuple(cols),
        coef=beta,
        cov=cov,
        deviance=-2.0 * log_likelihood(beta, Xd, y),
        null_deviance=-2.0 * null_ll,
        n_obs=n,
        n_iter=n_iter,
        converged=converged,
        separation=separation,
        ridge=ridge,
        alpha=config.alpha,
        seed=seed,
    )


def lr_predict_proba(model: LogisticModel, X) -> np.ndarray:
    return model.predict_proba(X)
