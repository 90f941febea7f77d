import numpy as np
import pytest


def numerical_gradient(f, x, h=1e-5):
    """Central finite differences of a scalar function over a flat array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        keep = xf[i]
        xf[i] = keep + h
        up = f(x)
        xf[i] = keep - h
        down = f(x)
        xf[i] = keep
        flat[i] = (up - down) / (2.0 * h)
    return grad


def gradient_mismatch(analytic, numeric, rel_tol=1e-5, abs_tol=1e-7):
    """Worst relative error, treating near-zero pairs by absolute tolerance."""
    analytic = np.asarray(analytic).ravel()
    numeric = np.asarray(numeric).ravel()
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if abs(a) < abs_tol and abs(n) < abs_tol:
            continue
        rel = abs(a - n) / max(abs(a), abs(n))
        worst = max(worst, rel)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
