"""Mini-batch training loop.

One optimizer step per batch, data reshuffled every epoch, per-batch mean
binary cross-entropy recorded in the loss history.  The shuffle generator
is the only randomness consumed here, so a run is fully reproducible from
(initial parameters, data order, seed).

Training mutates the network and its optimizer state in place and is
single-writer; independent networks may train concurrently.
"""

import numpy as np

from ..errors import DivergedError, DomainError, ParameterError
from . import fast
from .layers import Dense, Network, ReLU
from .loss import bce_grad, bce_with_logits
from .optim import Adam, AdamHyper


def _fast_eligible(net: Network, x: np.ndarray) -> bool:
    if not fast.HAVE_NUMBA:
        return False
    if len(net.layers) != 3:
        return False
    first, mid, last = net.layers
    return (
        isinstance(first, Dense)
        and isinstance(mid, ReLU)
        and isinstance(last, Dense)
        and last.out_dim == 1
        and first.out_dim == last.in_dim
        and x.ndim == 2
        and x.shape[1] == first.in_dim
    )


def train(net: Network, x, labels, *, epochs: int, batch_size: int,
          rng: np.random.Generator, hyper: AdamHyper = AdamHyper(),
          progress=None, allow_fast: bool = True):
    """Train net with ADAM; returns the per-batch mean-loss history.

    The history has epochs * ceil(n / batch_size) entries.  progress, if
    given, is called as progress(epoch_index, mean_loss_of_epoch) after
    every epoch.  Raises DivergedError (with the epoch index) as soon as a
    non-finite loss appears.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).ravel()
    n = x.shape[0]
    if n == 0:
        raise ParameterError("training set is empty")
    if y.shape[0] != n:
        raise ParameterError(f"{n} samples but {y.shape[0]} labels")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DomainError("training labels must be 0 or 1")
    if not 1 <= batch_size <= n:
        raise ParameterError(f"batch_size {batch_size} not in [1, {n}]")
    if epochs < 0:
        raise ParameterError("epochs must be >= 0")

    n_batches = -(-n // batch_size)
    history = np.empty(epochs * n_batches)
    if epochs == 0:
        return history

    if allow_fast and _fast_eligible(net, x):
        _run_fast(net, x, y, epochs, batch_size, rng, hyper, history, n_batches, progress)
    else:
        _run_generic(net, x, y, epochs, batch_size, rng, hyper, history, n_batches, progress)
    return history


def _run_fast(net, x, y, epochs, batch_size, rng, hyper, history, n_batches, progress):
    first = net.layers[0]
    m = np.zeros_like(net.theta)
    v = np.zeros_like(net.theta)
    t = 0
    for epoch in range(epochs):
        perm = rng.permutation(x.shape[0])
        xs = np.ascontiguousarray(x[perm])
        ys = np.ascontiguousarray(y[perm])
        off = epoch * n_batches
        t = fast.dense_epoch(
            xs, ys, net.theta, m, v, first.out_dim, first.in_dim, t,
            batch_size, hyper.lr, hyper.beta1, hyper.beta2, hyper.eps,
            history, off,
        )
        chunk = history[off:off + n_batches]
        if not np.all(np.isfinite(chunk)):
            raise DivergedError(epoch)
        if progress is not None:
            progress(epoch, float(chunk.mean()))


def _run_generic(net, x, y, epochs, batch_size, rng, hyper, history, n_batches, progress):
    adam = Adam([net.theta], hyper)
    n = x.shape[0]
    pos = 0
    for epoch in range(epochs):
        perm = rng.permutation(n)
        xs = x[perm]
        ys = y[perm]
        epoch_sum = 0.0
        for start in range(0, n, batch_size):
            xb = xs[start:start + batch_size]
            yb = ys[start:start + batch_size]
            logits = net.forward(xb, record=True)[:, 0]
            loss = bce_with_logits(logits, yb, reduction="mean")
            if not np.isfinite(loss):
                raise DivergedError(epoch)
            net.backward(bce_grad(logits, yb, reduction="mean")[:, None])
            adam.step([net.theta], [net.grad])
            history[pos] = loss
            epoch_sum += loss
            pos += 1
        if progress is not None:
            progress(epoch, epoch_sum / n_batches)
