"""Stripe-orientation images whose total brightness can betray the label.

Images are 32x32 with a 3-pixel-wide full-length light stripe, horizontal
(label 0) or vertical (label 1), on a uniform background.  Two color
codes parameterized by a >= 0:

    sum-aligned ("tilde")   horizontal: stripe 1-a, background -a
                            vertical:   stripe 1+a, background  a
    sum-inverted ("hat")    horizontal: stripe 1+a, background  a
                            vertical:   stripe 1-a, background -a

The stripe always exceeds the background by exactly 1, so orientation is
geometrically obvious; but the pixel sum is 96 + 1024a for sum-aligned
vertical / sum-inverted horizontal and 96 - 1024a for the other two.  A
threshold at 96 therefore reproduces the labels perfectly on sum-aligned
images and inverts them on sum-inverted ones, while the two renders of
the same stripe differ by only 2a per pixel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MalformedImageError, ParameterError
from .nn import (Conv2D, Dense, MaxPool2D, Network, ReLU, bce_with_logits,
                 save_network, train)
from .reporting import write_csv, write_pgm

log = logging.getLogger(__name__)

IMAGE_SIZE = 32
STRIPE_WIDTH = 3
N_POSITIONS = IMAGE_SIZE - STRIPE_WIDTH + 1  # 30
PIXEL_SUM_THRESHOLD = 3.0 * IMAGE_SIZE       # 96

HORIZONTAL = "horizontal"
VERTICAL = "vertical"
FAMILY_TILDE = "tilde"  # pixel sum encodes the orientation
FAMILY_HAT = "hat"      # pixel sum anti-encodes the orientation

LABELS = {HORIZONTAL: 0, VERTICAL: 1}


@dataclass(frozen=True)
class StripeSpec:
    orientation: str
    position: int  # first of the three stripe rows/columns, 0..29
    family: str
    a: float

    def __post_init__(self):
        if self.orientation not in (HORIZONTAL, VERTICAL):
            raise ParameterError(f"bad orientation {self.orientation!r}")
        if self.family not in (FAMILY_TILDE, FAMILY_HAT):
            raise ParameterError(f"bad family {self.family!r}")
        if not 0 <= self.position < N_POSITIONS:
            raise ParameterError(
                f"position must be in [0, {N_POSITIONS - 1}], got {self.position}"
            )
        if self.a < 0.0:
            raise ParameterError(f"a must be >= 0, got {self.a}")

    @property
    def label(self) -> int:
        return LABELS[self.orientation]


def stripe_values(spec: StripeSpec) -> tuple[float, float]:
    """(stripe value, background value) for the spec's color code."""
    bright = (spec.family == FAMILY_TILDE) == (spec.orientation == VERTICAL)
    return (1.0 + spec.a, spec.a) if bright else (1.0 - spec.a, -spec.a)


def render(spec: StripeSpec) -> np.ndarray:
    stripe, background = stripe_values(spec)
    img = np.full((IMAGE_SIZE, IMAGE_SIZE), background, dtype=np.float64)
    sl = slice(spec.position, spec.position + STRIPE_WIDTH)
    if spec.orientation == HORIZONTAL:
        img[sl, :] = stripe
    else:
        img[:, sl] = stripe
    return img


def swap_family(spec: StripeSpec) -> StripeSpec:
    other = FAMILY_HAT if spec.family == FAMILY_TILDE else FAMILY_TILDE
    return StripeSpec(spec.orientation, spec.position, other, spec.a)


def stripe_orientation(img: np.ndarray) -> int:
    """Ground truth read off the geometry: 0 horizontal, 1 vertical.

    Finds the three contiguous rows (or columns) whose shared value
    strictly exceeds the single background value; anything else raises
    MalformedImageError.  Deliberately ignores pixel magnitudes beyond the
    stripe/background comparison.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise MalformedImageError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE}, got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise MalformedImageError("non-finite pixel values")
    if np.all(np.ptp(img, axis=1) == 0.0):  # every row constant -> horizontal?
        if _valid_stripe(img[:, 0]):
            return 0
    if np.all(np.ptp(img, axis=0) == 0.0):  # every column constant -> vertical?
        if _valid_stripe(img[0, :]):
            return 1
    raise MalformedImageError("no single 3-wide full-length stripe found")


def _valid_stripe(values: np.ndarray) -> bool:
    background = values.min()
    high = values > background
    if high.sum() != STRIPE_WIDTH:
        return False
    idx = np.flatnonzero(high)
    if idx[-1] - idx[0] != STRIPE_WIDTH - 1:
        return False
    return np.all(values[high] == values[idx[0]]) and np.all(
        values[~high] == background
    )


def pixel_sum_label(img: np.ndarray) -> int:
    """The brightness shortcut: 1 iff the compensated pixel sum exceeds 96."""
    return int(math.fsum(np.asarray(img, dtype=np.float64).ravel())
               > PIXEL_SUM_THRESHOLD)


def training_specs(a: float = 0.01) -> list[StripeSpec]:
    """All 60 sum-aligned stripes at the given contrast, horizontals first."""
    specs = [StripeSpec(HORIZONTAL, p, FAMILY_TILDE, a) for p in range(N_POSITIONS)]
    specs += [StripeSpec(VERTICAL, p, FAMILY_TILDE, a) for p in range(N_POSITIONS)]
    return specs


def enumerate_training_set() -> list[tuple[np.ndarray, int]]:
    """The 60 unique sum-aligned images with a = 0.01, deterministically ordered."""
    return [(render(s), stripe_orientation(render(s))) for s in training_specs()]


def sample_test_specs(family: str, b: float, c: float, n: int,
                      rng: np.random.Generator) -> list[StripeSpec]:
    """n stripes: fair-coin orientation, a ~ Uniform[b, c], uniform position."""
    if not 0.0 < b < c:
        raise ParameterError(f"need 0 < b < c, got b={b}, c={c}")
    if n < 1:
        raise ParameterError("n must be >= 1")
    orientations = rng.integers(0, 2, size=n)
    a_vals = rng.uniform(b, c, size=n)
    positions = rng.integers(0, N_POSITIONS, size=n)
    return [
        StripeSpec(VERTICAL if o else HORIZONTAL, int(p), family, float(a))
        for o, p, a in zip(orientations, positions, a_vals)
    ]


def sample_test_set(family: str, b: float, c: float, n: int,
                    rng: np.random.Generator) -> list[tuple[np.ndarray, int]]:
    out = []
    for spec in sample_test_specs(family, b, c, n, rng):
        img = render(spec)
        out.append((img, stripe_orientation(img)))
    return out


class FamilySwapPerturber:
    """Re-render the same stripe in the other color code (2a per pixel)."""

    name = "case2-family-swap"

    def apply(self, sample):
        if not isinstance(sample, StripeSpec):
            raise ParameterError(
                f"family swap needs StripeSpec samples, got {type(sample).__name__}"
            )
        return render(sample), render(swap_family(sample))


# ---------------------------------------------------------------------------
# Network and experiment
# ---------------------------------------------------------------------------

def build_cnn(rng: np.random.Generator, dense_relu: bool = False) -> Network:
    """conv(5x5, 24) - relu - pool - conv(5x5, 48) - relu - pool - dense(10) - dense(1).

    Same-padded stride-1 convolutions and 2x2 pools take the 32x32 input
    through spatial sizes 32 -> 16 -> 8, so the dense head sees
    8*8*48 = 3072 features.  dense_relu optionally inserts a ReLU between
    the two dense layers (off by default).
    """
    layers = [
        Conv2D(1, 24, 5, rng), ReLU(), MaxPool2D(2),
        Conv2D(24, 48, 5, rng), ReLU(), MaxPool2D(2),
        Dense(8 * 8 * 48, 10, rng),
    ]
    if dense_relu:
        layers.append(ReLU())
    layers.append(Dense(10, 1, rng))
    return Network(layers)


def predict_image_labels(net: Network, images: np.ndarray,
                         chunk: int = 128) -> np.ndarray:
    """Labels for a stack of (n, 32, 32) images, evaluated in chunks."""
    images = np.asarray(images, dtype=np.float64)
    out = np.empty(len(images), dtype=np.int64)
    for start in range(0, len(images), chunk):
        batch = images[start:start + chunk, None, :, :]
        logits = net.forward(batch)[:, 0]
        out[start:start + chunk] = logits >= 0.0
    return out


@dataclass(frozen=True)
class Experiment2Config:
    rows: tuple[tuple[float, float], ...] = (
        (0.009, 0.010), (0.008, 0.009), (0.007, 0.008), (0.006, 0.007),
    )
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    epochs: int = 10
    batch_size: int = 60
    n_test: int = 1000
    dense_relu: bool = False
    dump_images: int = 4  # example PGM dumps per family (0 disables)


@dataclass(frozen=True)
class RowResult:
    b: float
    c: float
    seed: int
    acc_tilde: float
    acc_hat: float
    acc_g_tilde: float
    acc_g_hat: float


@dataclass(frozen=True)
class Experiment2Report:
    config: Experiment2Config
    rows: tuple[RowResult, ...]          # one per (b, c) x seed
    best_seed: int
    epoch_mean_loss: dict                # seed -> per-epoch mean batch loss
    artifacts: tuple[Path, ...] = ()

    def rows_for_seed(self, seed: int) -> list[RowResult]:
        return [r for r in self.rows if r.seed == seed]


def _accuracy(pred: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(pred == labels))


def run_experiment_2(config: Experiment2Config,
                     out_dir: Path | None = None) -> Experiment2Report:
    """Train on the 60 sum-aligned images per seed and sweep the test rows.

    For every (b, c) row and seed: accuracy of the trained network on
    fresh sum-aligned and sum-inverted test sets (n_test each), plus the
    accuracy of the pixel-sum threshold rule on the same sets.  The best
    seed maximizes (acc_tilde - acc_hat) on the first row.
    """
    train_imgs, train_labels = zip(*enumerate_training_set())
    x = np.stack(train_imgs)
    y = np.array(train_labels)

    all_rows = []
    losses = {}
    nets = {}
    for seed in config.seeds:
        init_rng, shuffle_rng, test_rng = (
            np.random.default_rng(s)
            for s in np.random.SeedSequence(seed).spawn(3)
        )
        net = build_cnn(init_rng, dense_relu=config.dense_relu)
        history = train(net, x, y, epochs=config.epochs,
                        batch_size=config.batch_size, rng=shuffle_rng)
        n_batches = -(-len(x) // config.batch_size)
        losses[seed] = (history.reshape(config.epochs, n_batches).mean(axis=1)
                        if config.epochs else history)
        nets[seed] = net
        for b, c in config.rows:
            row = _evaluate_row(net, b, c, config.n_test, test_rng, seed)
            all_rows.append(row)
            log.info("seed %d (b=%g, c=%g): net %.3f / %.3f, pixel-sum %.3f / %.3f",
                     seed, b, c, row.acc_tilde, row.acc_hat,
                     row.acc_g_tilde, row.acc_g_hat)

    first = config.rows[0]
    def headline(seed):
        r = next(r for r in all_rows if r.seed == seed and (r.b, r.c) == first)
        return r.acc_tilde - r.acc_hat
    best = max(config.seeds, key=headline)

    artifacts = ()
    if out_dir is not None:
        artifacts = tuple(_write_artifacts(
            config, all_rows, best, losses, nets, Path(out_dir)))
    return Experiment2Report(config, tuple(all_rows), best, losses, artifacts)


def _evaluate_row(net, b, c, n_test, test_rng, seed) -> RowResult:
    tilde = sample_test_set(FAMILY_TILDE, b, c, n_test, test_rng)
    hat = sample_test_set(FAMILY_HAT, b, c, n_test, test_rng)
    t_imgs = np.stack([im for im, _ in tilde])
    t_lab = np.array([lb for _, lb in tilde])
    h_imgs = np.stack([im for im, _ in hat])
    h_lab = np.array([lb for _, lb in hat])
    return RowResult(
        b, c, seed,
        _accuracy(predict_image_labels(net, t_imgs), t_lab),
        _accuracy(predict_image_labels(net, h_imgs), h_lab),
        _accuracy(np.array([pixel_sum_label(im) for im in t_imgs]), t_lab),
        _accuracy(np.array([pixel_sum_label(im) for im in h_imgs]), h_lab),
    )


def _write_artifacts(config, rows, best_seed, losses, nets, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    cols = ["b", "c", "seed", "acc_tilde", "acc_hat", "acc_g_tilde", "acc_g_hat"]
    yield write_csv(out_dir / "results.csv", cols,
                    [[r.b, r.c, r.seed, r.acc_tilde, r.acc_hat,
                      r.acc_g_tilde, r.acc_g_hat] for r in rows])
    yield write_csv(out_dir / "summary.csv",
                    ["b", "c", "best_seed"] + cols[3:],
                    [[r.b, r.c, best_seed, r.acc_tilde, r.acc_hat,
                      r.acc_g_tilde, r.acc_g_hat]
                     for r in rows if r.seed == best_seed])
    for seed, history in losses.items():
        yield write_csv(out_dir / f"loss_seed{seed}.csv",
                        ["epoch", "mean_batch_bce"],
                        [[i, v] for i, v in enumerate(history)])
        path = out_dir / f"phi_seed{seed}.fnet"
        save_network(nets[seed], path)
        yield path
    if config.dump_images > 0:
        b, c = config.rows[0]
        a_mid = 0.5 * (b + c)
        for i in range(min(config.dump_images, N_POSITIONS // 3)):
            orient = VERTICAL if i % 2 else HORIZONTAL
            for family in (FAMILY_TILDE, FAMILY_HAT):
                spec = StripeSpec(orient, 3 * i, family, a_mid)
                yield write_pgm(out_dir / "images" / f"{family}_{i}.pgm", render(spec))
