import numpy as np
import pytest

from sewerdeg.errors import NumericalError
from sewerdeg.models.mlp import MlpConfig, forward, init_params, loss_and_grad, mlp_fit
from sewerdeg.rng import Stream

from oracles import central_difference, max_relative_error


def test_zero_network_outputs_half():
    params = [np.zeros_like(p) for p in init_params((4, 100, 50, 1), Stream(0))]
    assert np.all(forward(params, np.random.default_rng(0).normal(size=(7, 4))) == 0.5)


def test_shapes_and_init_bounds():
    params = init_params((6, 100, 50, 1), Stream(1))
    assert [p.shape for p in params] == [(6, 100), (100,), (100, 50), (50,), (50, 1), (1,)]
    assert np.abs(params[0]).max() <= np.sqrt(6 / 6)
    assert np.abs(params[2]).max() <= np.sqrt(6 / 100)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backprop_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    sizes = (4, 100, 50, 1)
    params = init_params(sizes, Stream(seed))
    params = [p + 0.05 * rng.normal(size=p.shape) for p in params]
    X = rng.normal(size=(5, 4))
    y = np.array([0, 1, 1, 0, 1.0])
    _, grads = loss_and_grad(params, X, y)
    worst = 0.0
    for k, p in enumerate(params):
        # a random subset of coordinates per tensor keeps the check fast
        idx = rng.choice(p.size, size=min(p.size, 40), replace=False)

        def f(v, k=k):
            q = list(params)
            q[k] = v
            return loss_and_grad(q, X, y)[0]

        num = central_difference(f, p, h=1e-6) if p.size <= 60 else None
        if num is None:
            num = np.zeros(p.size)
            for i in idx:
                e = np.zeros(p.size)
                e[i] = 1e-6
                num[i] = (f(p + e.reshape(p.shape)) - f(p - e.reshape(p.shape))) / 2e-6
            worst = max(worst, max_relative_error(grads[k].ravel()[idx], num[idx]))
        else:
            worst = max(worst, max_relative_error(grads[k], num))
    assert worst < 1e-4


def test_training_deterministic_and_learns(small_matrix):
    _, fm = small_matrix
    cfg = MlpConfig(epochs=15)
    a = mlp_fit(fm, config=cfg, seed=3)
    b = mlp_fit(fm, config=cfg, seed=3)
    assert all(np.array_equal(p, q) for p, q in zip(a.params, b.params))
    assert a.loss_trace[-1] < a.loss_trace[0]
    p = a.predict_proba(fm)
    assert np.all((p > 0) & (p < 1))


def test_non_finite_loss_aborts():
    X = np.ones((8, 2))
    X[3, 0] = 1e308  # overflows the first layer
    with pytest.raises(NumericalError, match="epoch 0"):
        with np.errstate(all="ignore"):
            mlp_fit(X, np.array([0, 1] * 4), config=MlpConfig(epochs=2, batch=4), seed=0)
