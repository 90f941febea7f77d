"""Binary network container.

Byte layout (all integers little-endian, all floats IEEE-754 binary64):

    offset  size  field
    0       8     magic  b"FLABNET\\x00"
    8       1     format version (currently 1)
    9       4     uint32 layer count
    13      ...   one record per layer, in declaration order

Layer records start with a uint8 kind code, then kind-specific fields:

    1 dense      uint32 in_dim, uint32 out_dim,
                 float64[out*in] weights (row-major), float64[out] bias
    2 conv2d     uint32 in_channels, uint32 filters, uint32 kernel_size,
                 uint32 stride (always 1), uint8 padding (0 = same),
                 float64[F*C*k*k] weights (row-major), float64[F] bias
    3 maxpool2d  uint32 pool, uint32 stride (= pool), uint8 padding (0 = same)
    4 relu       (no payload)
    5 sigmoid    (no payload)
"""

import struct
from pathlib import Path

import numpy as np

from ..errors import SerializationError
from .layers import Conv2D, Dense, MaxPool2D, Network, ReLU, Sigmoid

MAGIC = b"FLABNET\x00"
VERSION = 1

_KIND_CODES = {"dense": 1, "conv2d": 2, "maxpool2d": 3, "relu": 4, "sigmoid": 5}


def save_network(net: Network, path) -> None:
    chunks = [MAGIC, struct.pack("<BI", VERSION, len(net.layers))]
    for layer in net.layers:
        chunks.append(struct.pack("<B", _KIND_CODES[layer.kind]))
        if isinstance(layer, Dense):
            chunks.append(struct.pack("<II", layer.in_dim, layer.out_dim))
            chunks.append(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
            chunks.append(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())
        elif isinstance(layer, Conv2D):
            chunks.append(struct.pack(
                "<IIIIB", layer.in_channels, layer.filters, layer.kernel_size, 1, 0
            ))
            chunks.append(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
            chunks.append(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())
        elif isinstance(layer, MaxPool2D):
            chunks.append(struct.pack("<IIB", layer.pool, layer.pool, 0))
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SerializationError("truncated network file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int, shape) -> np.ndarray:
        raw = self.take(count * 8)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def load_network(path) -> Network:
    r = _Reader(Path(path).read_bytes())
    if r.take(len(MAGIC)) != MAGIC:
        raise SerializationError(f"bad magic header in {path}")
    version, n_layers = r.unpack("<BI")
    if version != VERSION:
        raise SerializationError(f"unsupported format version {version}")
    layers = []
    for _ in range(n_layers):
        (code,) = r.unpack("<B")
        if code == 1:
            in_dim, out_dim = r.unpack("<II")
            layer = Dense(in_dim, out_dim)
            layer.W = r.floats(out_dim * in_dim, (out_dim, in_dim))
            layer.b = r.floats(out_dim, (out_dim,))
        elif code == 2:
            in_ch, filters, k, stride, padding = r.unpack("<IIIIB")
            if stride != 1 or padding != 0:
                raise SerializationError("conv2d requires stride 1, same padding")
            layer = Conv2D(in_ch, filters, kernel_size=k)
            layer.W = r.floats(filters * in_ch * k * k, (filters, in_ch, k, k))
            layer.b = r.floats(filters, (filters,))
        elif code == 3:
            pool, stride, padding = r.unpack("<IIB")
            if stride != pool or padding != 0:
                raise SerializationError("maxpool2d requires stride == pool, same padding")
            layer = MaxPool2D(pool)
        elif code == 4:
            layer = ReLU()
        elif code == 5:
            layer = Sigmoid()
        else:
            raise SerializationError(f"unknown layer kind code {code}")
        layers.append(layer)
    if r.pos != len(r.data):
        raise SerializationError("trailing bytes after the last layer record")
    return Network(layers)
