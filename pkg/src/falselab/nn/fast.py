"""Jitted training kernel for tiny dense-ReLU-dense binary classifiers.

Millions of optimizer steps on a (in_dim -> hidden -> 1) network are
dominated by per-call overhead in the generic layer engine, so the whole
epoch (forward, batch-mean binary cross-entropy, backward, ADAM) runs
inside one compiled loop.  The arithmetic mirrors the generic path
exactly: same stable loss form, same bias-corrected ADAM update; the test
suite asserts trajectory agreement between the two implementations.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def dense_epoch(xs, ys, theta, m, v, hidden, in_dim, adam_t, batch,
                lr, beta1, beta2, eps, hist, hist_off):
    """Run one shuffled epoch; returns the updated ADAM step counter.

    theta/m/v are flat buffers laid out as W1 (hidden, in_dim), b1, W2
    (1, hidden), b2 in that order.  Per-batch mean losses land in
    hist[hist_off:].
    """
    n = xs.shape[0]
    n_w1 = hidden * in_dim
    w1 = theta[:n_w1].reshape(hidden, in_dim)
    b1 = theta[n_w1:n_w1 + hidden]
    w2 = theta[n_w1 + hidden:n_w1 + 2 * hidden]
    nparam = theta.size
    grad = np.empty(nparam)
    d_w1 = grad[:n_w1].reshape(hidden, in_dim)
    d_b1 = grad[n_w1:n_w1 + hidden]
    d_w2 = grad[n_w1 + hidden:n_w1 + 2 * hidden]
    pre = np.empty(hidden)
    t = adam_t
    k = hist_off
    for start in range(0, n, batch):
        stop = min(start + batch, n)
        bsz = stop - start
        grad[:] = 0.0
        loss = 0.0
        for i in range(start, stop):
            y = ys[i]
            logit = theta[nparam - 1]
            for j in range(hidden):
                acc = b1[j]
                for c in range(in_dim):
                    acc += w1[j, c] * xs[i, c]
                pre[j] = acc
                if acc > 0.0:
                    logit += w2[j] * acc
            e = np.exp(-abs(logit))
            loss += (logit if logit > 0.0 else 0.0) - logit * y + np.log1p(e)
            sg = 1.0 / (1.0 + e) if logit >= 0.0 else e / (1.0 + e)
            g = (sg - y) / bsz
            grad[nparam - 1] += g
            for j in range(hidden):
                if pre[j] > 0.0:
                    d_w2[j] += g * pre[j]
                    dh = g * w2[j]
                    for c in range(in_dim):
                        d_w1[j, c] += dh * xs[i, c]
                    d_b1[j] += dh
        t += 1
        c2 = 1.0 - beta2 ** t
        alpha = lr * np.sqrt(c2) / (1.0 - beta1 ** t)
        eps_t = eps * np.sqrt(c2)
        for q in range(nparam):
            mq = beta1 * m[q] + (1.0 - beta1) * grad[q]
            vq = beta2 * v[q] + (1.0 - beta2) * grad[q] * grad[q]
            m[q] = mq
            v[q] = vq
            theta[q] -= alpha * mq / (np.sqrt(vq) + eps_t)
        hist[k] = loss / bsz
        k += 1
    return t
