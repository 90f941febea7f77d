"""Weight initialization."""

import numpy as np

from ..errors import ParameterError


def glorot_uniform(shape, rng: np.random.Generator) -> np.ndarray:
    """Draw i.i.d. Uniform[-L, L] with L = sqrt(6 / (fan_in + fan_out)).

    Fan counts are inferred from the shape: a 2-D shape (out_dim, in_dim)
    is a dense weight matrix, a 4-D shape (filters, in_channels, kh, kw)
    is a convolution kernel whose fans are kernel_area * channels.
    """
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ParameterError(f"glorot_uniform needs positive dims, got {shape}")
    if len(shape) == 2:
        fan_out, fan_in = shape
    elif len(shape) == 4:
        f, c, kh, kw = shape
        fan_in = c * kh * kw
        fan_out = f * kh * kw
    else:
        raise ParameterError(
            f"cannot infer fan_in/fan_out from a {len(shape)}-D shape {shape}"
        )
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
