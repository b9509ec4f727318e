"""Feed-forward network (ReLU hidden layers, sigmoid output) trained with Adam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sewerdeg.errors import NumericalError, ValidationError
from sewerdeg.models.base import Classifier, as_xy, check_binary, sigmoid
from sewerdeg.rng import Stream


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (100, 50)
    epochs: int = 200
    batch: int = 32
    step: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_params(sizes, stream: Stream) -> list[np.ndarray]:
    """He-uniform weights ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases.

    Returned flat as ``[W1, b1, W2, b2, ...]`` with ``W_k`` of shape (fan_in, fan_out).
    """
    params = []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = np.sqrt(6.0 / fan_in)
        W = stream.spawn("layer", k).uniform(fan_in * fan_out, -bound, bound).reshape(fan_in, fan_out)
        params += [W, np.zeros(fan_out)]
    return params


def forward(params, X) -> np.ndarray:
    """Output probabilities; X has shape (n, d)."""
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers - 1):
        h = np.maximum(h @ params[2 * k] + params[2 * k + 1], 0.0)
    return sigmoid(h @ params[-2] + params[-1]).ravel()


def loss_and_grad(params, X, y):
    """Mean binary cross-entropy and its gradient via backpropagation."""
    n_layers = len(params) // 2
    acts = [X]
    pre = []
    h = X
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        pre.append(z)
        h = np.maximum(z, 0.0) if k < n_layers - 1 else z
        acts.append(h)
    logit = pre[-1].ravel()
    n = len(y)
    loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
    delta = ((sigmoid(logit) - y) / n)[:, None]
    grads = [None] * len(params)
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params[2 * k].T) * (pre[k - 1] > 0)
    return loss, grads


@dataclass(frozen=True)
class MlpModel(Classifier):
    name = "ann"
    columns: tuple[str, ...]
    sizes: tuple[int, ...]
    params: tuple[np.ndarray, ...]
    loss_trace: tuple[float, ...] = ()
    config: MlpConfig = MlpConfig()
    seed: int | None = None

    def _proba(self, X):
        return forward(self.params, X)

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "params": [p.tolist() for p in self.params],
            "loss_trace": list(self.loss_trace),
            "config": {
                "hidden": list(self.config.hidden),
                "epochs": self.config.epochs,
                "batch": self.config.batch,
                "step": self.config.step,
            },
        }

    @classmethod
    def from_dict(cls, columns, params, seed=None):
        c = params["config"]
        cfg = MlpConfig(hidden=tuple(c["hidden"]), epochs=c["epochs"], batch=c["batch"], step=c["step"])
        arrays = tuple(np.asarray(p, dtype=np.float64) for p in params["params"])
        return cls(tuple(columns), tuple(params["sizes"]), arrays, tuple(params["loss_trace"]), cfg, seed)


def mlp_fit(X, y=None, config: MlpConfig = MlpConfig(), seed: int = 0, columns=None) -> MlpModel:
    """Mini-batch Adam on the mean cross-entropy; batches reshuffled every epoch."""
    X, y, cols = as_xy(X, y)
    y = check_binary(y)
    n, d = X.shape
    if d < 1:
        raise ValidationError("need at least one feature")
    sizes = (d,) + tuple(config.hidden) + (1,)
    stream = Stream(seed, "mlp")
    params = init_params(sizes, stream.spawn("init"))
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    shuffle = stream.spawn("shuffle")
    t = 0
    trace = []
    for epoch in range(config.epochs):
        order = shuffle.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            loss, grads = loss_and_grad(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}, step {t}")
            total += loss * len(idx)
            t += 1
            for k, g in enumerate(grads):
                m[k] = config.beta1 * m[k] + (1 - config.beta1) * g
                v[k] = config.beta2 * v[k] + (1 - config.beta2) * g * g
                mhat = m[k] / (1 - config.beta1**t)
                vhat = v[k] / (1 - config.beta2**t)
                params[k] = params[k] - config.step * mhat / (np.sqrt(vhat) + config.eps)
        trace.append(total / n)
    return MlpModel(tuple(columns or cols), sizes, tuple(params), tuple(trace), config, seed)
