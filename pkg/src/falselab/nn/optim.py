"""ADAM optimizer with bias correction.

The update for each parameter array p with gradient g is

    t <- t + 1
    m <- beta1*m + (1-beta1)*g
    v <- beta2*v + (1-beta2)*g^2
    p <- p - lr * (m / (1-beta1^t)) / (sqrt(v / (1-beta2^t)) + eps)

implemented with the bias corrections folded into two scalars per step,
which is algebraically the same update.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    """Holds first/second-moment accumulators shaped like the parameters."""

    def __init__(self, params, hyper: AdamHyper = AdamHyper()):
        self.hyper = hyper
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        """Update params in place from grads; increments the step counter."""
        if len(params) != len(self.m) or len(grads) != len(params):
            raise ParameterError("params/grads do not match the optimizer state")
        hp = self.hyper
        self.t += 1
        c1 = 1.0 - hp.beta1 ** self.t
        c2 = 1.0 - hp.beta2 ** self.t
        alpha = hp.lr * np.sqrt(c2) / c1
        eps_t = hp.eps * np.sqrt(c2)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape or p.shape != m.shape:
                raise ParameterError(
                    f"gradient shape {g.shape} does not match parameter {p.shape}"
                )
            m *= hp.beta1
            m += (1.0 - hp.beta1) * g
            v *= hp.beta2
            v += (1.0 - hp.beta2) * np.square(g)
            p -= alpha * m / (np.sqrt(v) + eps_t)
        return params
