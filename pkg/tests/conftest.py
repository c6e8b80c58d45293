import numpy as np
import pytest


def central_difference(func, w, step=1e-6):
    """Independent gradient oracle: central finite differences of a scalar
    function (``func`` may return the value alone or a (value, grad) pair)."""

    def value(x):
        out = func(x)
        return out[0] if isinstance(out, tuple) else out

    grad = np.empty_like(np.asarray(w, dtype=float))
    for j in range(grad.size):
        plus = np.array(w, dtype=float)
        minus = np.array(w, dtype=float)
        plus[j] += step
        minus[j] -= step
        grad[j] = (value(plus) - value(minus)) / (2.0 * step)
    return grad


def relative_gradient_error(analytic, numeric):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = max(1e-8, np.abs(analytic).max(), np.abs(numeric).max())
    return float(np.abs(analytic - numeric).max() / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
