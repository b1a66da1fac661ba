import numpy as np
import pytest

from ppgbp import config, synth


@pytest.fixture(scope="session")
def small_record():
    """A quick synthetic subject (~3.5 min of signal) for pipeline tests."""
    return synth.generate_subject(n_beats=260, seed=11)


@pytest.fixture(scope="session")
def default_config():
    return config.PipelineConfig().with_seed(11)


def finite_difference_gradients(model, x, y, eps=1e-5):
    """Central finite differences of the batch loss over every parameter.

    Independent of the backprop path: perturbs one coordinate at a
    time and re-evaluates the loss.
    """
    from ppgbp import ann

    grads = []
    for layer in range(len(model.weights)):
        for attr in ("weights", "biases"):
            param = getattr(model, attr)[layer]
            g = np.zeros_like(param)
            it = np.nditer(param, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + eps
                lo_plus, _ = ann.loss_and_gradient(model, x, y)
                param[idx] = orig - eps
                lo_minus, _ = ann.loss_and_gradient(model, x, y)
                param[idx] = orig
                g[idx] = (lo_plus - lo_minus) / (2 * eps)
                it.iternext()
            grads.append(g)
    return grads


def backprop_gradients_flat(model, x, y):
    from ppgbp import ann

    _, grads = ann.loss_and_gradient(model, x, y)
    flat = []
    for gw, gb in grads:
        flat.append(gw)
        flat.append(gb)
    return flat


def random_checked_model(rng, activation, eps=1e-5):
    """A small random (model, batch) pair safe for finite differencing.

    For relu, draws are rejected while any hidden pre-activation sits
    within 1e-3 of the kink: a central difference straddling a
    non-differentiable point is meaningless.
    """
    from ppgbp import ann

    for _ in range(200):
        sizes = (
            int(rng.integers(2, 7)),
            int(rng.integers(2, 6)),
            int(rng.integers(2, 6)),
            int(rng.integers(1, 4)),
        )
        model = ann.init_model(sizes, seed=int(rng.integers(1 << 31)), hidden_activation=activation)
        model.scaler_mean = rng.normal(100.0, 5.0, sizes[-1])
        model.scaler_std = rng.uniform(2.0, 8.0, sizes[-1])
        n = int(rng.integers(1, 9))
        x = rng.normal(size=(n, sizes[0]))
        y = model.scaler_mean + model.scaler_std * rng.normal(size=(n, sizes[-1]))
        if activation == "relu":
            h = x
            closest = np.inf
            for w, b in zip(model.weights[:-1], model.biases[:-1]):
                a = h @ w + b
                closest = min(closest, float(np.abs(a).min()))
                h = np.maximum(a, 0.0)
            if closest < 1e-3:
                continue
        return model, x, y
    raise RuntimeError("could not draw a kink-free relu model")
