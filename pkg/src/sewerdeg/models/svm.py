"""Kernel SVM trained by SMO, with Platt-scaled probabilities."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from sewerdeg.errors import ValidationError
from sewerdeg.models.base import Classifier, as_xy, check_binary, sigmoid
from sewerdeg.rng import Stream

TAU = 1e-12


class ConvergenceWarning(UserWarning):
    pass


def kernel_matrix(A, B, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValidationError(f"unknown kernel {kernel!r}")


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    n_iter: int
    violation: float
    converged: bool
    objective_trace: list = field(default_factory=list)


def dual_objective(alpha, y, K) -> float:
    """``sum(alpha) - 1/2 alpha' Q alpha`` with ``Q_ij = y_i y_j K_ij``."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def smo_solve(K, y, C: float, tol: float = 1e-3, max_iter: int = 100_000, trace: bool = False) -> SmoResult:
    """Solve the C-SVM dual on a precomputed kernel.

    Working pairs are chosen by the maximal-violation / second-order rule;
    each pair is optimised analytically and clipped to the box, so the dual
    objective never decreases.  Stops when ``m(alpha) - M(alpha) <= tol``.
    """
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    diag = np.diag(K).copy()
    objective = [0.0] if trace else []
    it = 0
    violation = np.inf
    while True:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        score = -y * G
        if not up.any() or not low.any():
            violation = 0.0
            break
        m = np.max(np.where(up, score, -np.inf))
        M = np.min(np.where(low, score, np.inf))
        violation = float(m - M)
        if violation <= tol or it >= max_iter:
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        b = m - score
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        cand = low & (score < m)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))

        ai, aj = alpha[i], alpha[j]
        Kij = K[i, j]
        quad = diag[i] + diag[j] - 2.0 * Kij
        if quad <= 0:
            quad = TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ai -= delta
            aj += delta
            if s > C:
                if ai > C:
                    ai, aj = C, s - C
            elif aj < 0:
                aj, ai = 0.0, s
            if s > C:
                if aj > C:
                    aj, ai = C, s - C
            elif ai < 0:
                ai, aj = 0.0, s
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += y * (y[i] * K[i] * d_i + y[j] * K[j] * d_j)
        it += 1
        if trace:
            objective.append(0.5 * alpha.sum() - 0.5 * alpha @ G)

    free = (alpha > 0) & (alpha < C)
    yG = y * G
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub = np.min(np.where(((y > 0) & (alpha >= C)) | ((y < 0) & (alpha <= 0)), yG, np.inf), initial=np.inf)
        lb = np.max(np.where(((y > 0) & (alpha <= 0)) | ((y < 0) & (alpha >= C)), yG, -np.inf), initial=-np.inf)
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else 0.0
    return SmoResult(alpha, rho, it, violation, violation <= tol, objective)


def platt_fit(f, y01, max_iter: int = 100) -> tuple[float, float]:
    """Fit ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by regularised-target Newton iterations."""
    f = np.asarray(f, dtype=np.float64)
    y01 = np.asarray(y01)
    prior1 = float(y01.sum())
    prior0 = float(len(y01) - prior1)
    t = np.where(y01 == 1, (prior1 + 1) / (prior1 + 2), 1 / (prior0 + 2))
    sigma = 1e-12

    def obj(A, B):
        z = f * A + B
        return float(np.sum(np.where(z >= 0, t * z, (t - 1) * z) + np.log1p(np.exp(-np.abs(z)))))

    A, B = 0.0, float(np.log((prior0 + 1) / (prior1 + 1)))
    fval = obj(A, B)
    for _ in range(max_iter):
        z = f * A + B
        p = sigmoid(-z)
        d2 = p * (1 - p)
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1, g2 = np.sum(f * d1), np.sum(d1)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = obj(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2
        else:
            break
    return float(A), float(B)


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    kernel: str = "rbf"
    gamma: float | None = None  # default 1 / d
    tol: float = 1e-3
    max_iter: int = 100_000
    platt_folds: int = 5


@dataclass(frozen=True)
class SvmModel(Classifier):
    name = "svm"
    columns: tuple[str, ...]
    kernel: str
    gamma: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    platt_a: float
    platt_b: float
    C: float = 1.0
    kkt_violation: float = 0.0
    n_iter: int = 0
    seed: int | None = None

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return kernel_matrix(X, self.support_vectors, self.kernel, self.gamma) @ self.dual_coef + self.bias

    def _proba(self, X):
        f = kernel_matrix(X, self.support_vectors, self.kernel, self.gamma) @ self.dual_coef + self.bias
        return sigmoid(-(self.platt_a * f + self.platt_b))

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "gamma": self.gamma,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "platt_a": self.platt_a,
            "platt_b": self.platt_b,
            "C": self.C,
            "kkt_violation": self.kkt_violation,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, columns, params, seed=None):
        d = len(columns)
        return cls(
            tuple(columns),
            params["kernel"],
            float(params["gamma"]),
            np.asarray(params["support_vectors"], dtype=np.float64).reshape(-1, d),
            np.asarray(params["dual_coef"], dtype=np.float64),
            float(params["bias"]),
            float(params["platt_a"]),
            float(params["platt_b"]),
            float(params["C"]),
            float(params["kkt_violation"]),
            int(params["n_iter"]),
            seed,
        )


def _fit_dual(X, ypm, cfg: SvmConfig, gamma: float, trace=False):
    K = kernel_matrix(X, X, cfg.kernel, gamma)
    res = smo_solve(K, ypm, cfg.C, cfg.tol, cfg.max_iter, trace=trace)
    if not res.converged:
        warnings.warn(
            f"SMO stopped after {res.n_iter} iterations with KKT violation {res.violation:.3g} > tol {cfg.tol}",
            ConvergenceWarning,
            stacklevel=3,
        )
    return res


def svm_fit(X, y=None, config: SvmConfig = SvmConfig(), seed: int = 0, columns=None, trace: bool = False):
    """Returns the fitted :class:`SvmModel`; with ``trace=True`` also the SMO result."""
    X, y, cols = as_xy(X, y)
    y = check_binary(y)
    if y.min() == y.max():
        raise ValidationError("SVM needs both classes in the training labels")
    n, d = X.shape
    gamma = config.gamma if config.gamma is not None else 1.0 / d
    ypm = np.where(y > 0, 1.0, -1.0)
    res = _fit_dual(X, ypm, config, gamma, trace)
    sv = res.alpha > 0

    def decision(model_alpha, model_rho, Xtr, ytr, Xte):
        keep = model_alpha > 0
        return kernel_matrix(Xte, Xtr[keep], config.kernel, gamma) @ (model_alpha[keep] * ytr[keep]) - model_rho

    # Platt targets from out-of-fold decision values
    k = config.platt_folds
    if k >= 2 and n >= 4 * k:
        folds = Stream(seed, "svm", "platt").permutation(n) % k
        f = np.empty(n)
        for fold in range(k):
            te = folds == fold
            tr = ~te
            if ypm[tr].min() == ypm[tr].max():
                f[te] = 0.0
                continue
            r = _fit_dual(X[tr], ypm[tr], config, gamma)
            f[te] = decision(r.alpha, r.rho, X[tr], ypm[tr], X[te])
    else:
        f = decision(res.alpha, res.rho, X, ypm, X)
    A, B = platt_fit(f, y)
    model = SvmModel(
        columns=tuple(columns or cols),
        kernel=config.kernel,
        gamma=float(gamma),
        support_vectors=X[sv].copy(),
        dual_coef=(res.alpha * ypm)[sv],
        bias=-res.rho,
        platt_a=A,
        platt_b=B,
        C=config.C,
        kkt_violation=res.violation,
        n_iter=res.n_iter,
        seed=seed,
    )
    return (model, res) if trace else model
