"""Interval-parity classification with a planted second-coordinate shortcut.

The ground truth on [b, 1] x [0, 1] with b = a/(K+1) is

    label(x) = ceil(a / x1) mod 2,

constant on each interval (a/(k+1), a/k).  The *stable region* keeps a
margin eps around every jump:

    S_eps = union over k = a..K of (a/(k+1) + eps, a/k - eps),

nonempty for every k exactly when eps < b^2 / (2(a-b)).  Training sets
place x1 in the stable region and either set x2 = 0 everywhere (zero
lift) or plant the shortcut x2 = delta * label(x1) (delta lift), which
makes "x2 is not 0" a perfectly predictive rival rule on the training
data.  Diagnostic grids with x2 = 0 versus x2 = delta * label(x1) then
separate classifiers that learned the interval rule from classifiers
that learned the shortcut.

build_stable_network constructs, without any training, a
dense-ReLU-dense network that classifies the whole stable region
correctly and drives the summed cross-entropy below any requested bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics
from .errors import ConstructionError, DomainError, ParameterError
from .nn import Dense, Network, ReLU, bce_with_logits, save_network, train
from .reporting import write_csv

log = logging.getLogger(__name__)

LIFT_ZERO = "zero"
LIFT_DELTA = "delta"


def problem_violations(a, K, epsilon, delta) -> list[str]:
    """All constraint violations for the problem parameters, as messages."""
    out = []
    if not (isinstance(a, (int, np.integer)) and a >= 1):
        out.append(f"a must be a positive integer, got {a!r}")
        return out
    if not (isinstance(K, (int, np.integer)) and K > a):
        out.append(f"a < K required, got a={a}, K={K!r}")
        return out
    b = a / (K + 1)
    bound = b * b / (2.0 * (a - b))
    if not 0.0 < epsilon < bound:
        out.append(
            f"epsilon < b^2/(2(a-b)) required: epsilon={epsilon!r}, bound={bound!r}"
        )
    if not 0.0 < delta < epsilon:
        out.append(f"0 < delta < epsilon required: delta={delta!r}, epsilon={epsilon!r}")
    return out


@dataclass(frozen=True)
class Case1Problem:
    a: int = 20
    K: int = 26
    epsilon: float = 1e-2
    delta: float = 1e-4

    def __post_init__(self):
        bad = problem_violations(self.a, self.K, self.epsilon, self.delta)
        if bad:
            raise ConstructionError("; ".join(bad))

    @property
    def b(self) -> float:
        return self.a / (self.K + 1)


@dataclass(frozen=True)
class IntervalUnion:
    """Ordered disjoint open intervals (lo, hi)."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        prev_hi = -np.inf
        for lo, hi in self.intervals:
            if not lo < hi:
                raise ConstructionError(f"empty interval ({lo}, {hi})")
            if lo < prev_hi:
                raise ConstructionError("intervals overlap or are out of order")
            prev_hi = hi

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def contains(self, x):
        """Open-interval membership, elementwise."""
        x = np.asarray(x, dtype=np.float64)
        bounds = np.array([v for pair in self.intervals for v in pair])
        pos = np.searchsorted(bounds, x, side="right")
        inside = (pos % 2 == 1) & (bounds[np.minimum(pos, len(bounds)) - 1] != x)
        return inside if x.ndim else bool(inside)

    @property
    def total_length(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))


def parity_label(problem: Case1Problem, x1):
    """Ground-truth label ceil(a / x1) mod 2, elementwise."""
    x1 = np.asarray(x1, dtype=np.float64)
    if np.any(x1 <= 0.0):
        raise DomainError("x1 must be positive")
    lab = np.ceil(problem.a / x1).astype(np.int64) % 2
    return lab if x1.ndim else int(lab)


def nonzero_x2_label(x2):
    """The shortcut rule: 0 where x2 == 0 exactly, else 1."""
    x2 = np.asarray(x2)
    lab = (x2 != 0.0).astype(np.int64)
    return lab if x2.ndim else int(lab)


def stable_region(problem: Case1Problem) -> IntervalUnion:
    """The union of label-constant intervals trimmed by eps, ascending in x1."""
    a, K, eps = problem.a, problem.K, problem.epsilon
    pairs = tuple(
        (a / (k + 1) + eps, a / k - eps) for k in range(K, a - 1, -1)
    )
    return IntervalUnion(pairs)


@dataclass(frozen=True)
class LabeledPoint:
    x1: float
    x2: float
    label: int


def points_to_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([[p.x1, p.x2] for p in points], dtype=np.float64)
    y = np.array([p.label for p in points], dtype=np.int64)
    return x, y


def sample_training_set(problem: Case1Problem, r: int, lift: str,
                        rng: np.random.Generator,
                        per_interval: bool | None = None) -> list[LabeledPoint]:
    """Draw r samples with x1 spread across the stable intervals.

    Counts are distributed as evenly as possible over the intervals; when
    r equals the interval count this is exactly one sample per interval.
    Passing per_interval=True asserts the one-or-more-per-interval rule and
    fails if r is too small for it.  The zero lift sets x2 = 0; the delta
    lift sets x2 = delta * label(x1).
    """
    if lift not in (LIFT_ZERO, LIFT_DELTA):
        raise ParameterError(f"lift must be '{LIFT_ZERO}' or '{LIFT_DELTA}', got {lift!r}")
    if r < 1:
        raise ParameterError("need at least one sample")
    region = stable_region(problem)
    n_int = len(region)
    if per_interval is None:
        per_interval = r == n_int
    if per_interval and r < n_int:
        raise ParameterError(
            f"one sample per interval needs r >= {n_int}, got {r}"
        )
    base, extra = divmod(r, n_int)
    points = []
    for i, (lo, hi) in enumerate(region):
        count = base + (1 if i < extra else 0)
        for x1 in rng.uniform(lo, hi, size=count):
            label = parity_label(problem, x1)
            x2 = problem.delta * label if lift == LIFT_DELTA else 0.0
            points.append(LabeledPoint(float(x1), float(x2), label))
    return points


@dataclass(frozen=True)
class DiagnosticSets:
    """Paired evaluation grids over [b, 1]: flat (x2 = 0) and lifted."""

    x1: np.ndarray         # shared grid
    c0: np.ndarray         # (n, 2), x2 = 0
    cdelta: np.ndarray     # (n, 2), x2 = delta * label(x1)
    labels: np.ndarray     # ground truth on the grid
    in_stable: np.ndarray  # bool mask: grid point inside the stable region


def diagnostic_sets(problem: Case1Problem, grid_n: int) -> DiagnosticSets:
    if grid_n < 2:
        raise ParameterError("grid_n must be >= 2")
    x1 = np.linspace(problem.b, 1.0, grid_n)
    labels = parity_label(problem, x1)
    c0 = np.column_stack([x1, np.zeros_like(x1)])
    cdelta = np.column_stack([x1, problem.delta * labels])
    mask = stable_region(problem).contains(x1)
    return DiagnosticSets(x1, c0, cdelta, labels, mask)


# ---------------------------------------------------------------------------
# Analytic stable network
# ---------------------------------------------------------------------------

def stable_logit_scale(eta: float, r: int) -> float:
    """Smallest logit magnitude N with per-sample cross-entropy below eta/r.

    Solves sigma(N) = exp(-eta/r); a relative safety margin of 1e-9 keeps
    the summed loss strictly under eta despite floating-point evaluation
    of the network itself.
    """
    if eta <= 0.0:
        raise ParameterError("eta must be positive")
    if r < 1:
        raise ParameterError("r must be >= 1")
    log_q = -eta / r
    # logit(q) = log(q) - log(1 - q), with 1 - q = -expm1(-eta/r)
    n = log_q - np.log(-np.expm1(log_q))
    return float(n + 1e-9 * max(1.0, abs(n)))


def build_stable_network(problem: Case1Problem, eta: float, r: int) -> Network:
    """Construct the provably stable classifier as a dense-ReLU-dense net.

    One four-unit bump per stable interval (c, d): ReLU ramps of width eps
    rising over [c - eps, c] and falling over [d, d + eps] make the bump
    exactly 1 on [c, d] and 0 outside (c - eps, d + eps), so bumps of
    adjacent intervals never interact.  Bumps over even-k intervals (the
    label-1 intervals) are summed with output weight 2N and the output
    bias is -N, giving logit +N on label-1 intervals and -N elsewhere on
    the stable region.  The x2 coordinate has weight 0 in every unit.
    """
    scale = stable_logit_scale(eta, r)
    a, K, eps = problem.a, problem.K, problem.epsilon
    n_units = 4 * (K - a + 1)
    w1 = np.zeros((n_units, 2))
    b1 = np.zeros(n_units)
    w2 = np.zeros((1, n_units))
    row = 0
    for k in range(problem.a, problem.K + 1):
        c = a / (k + 1) + eps
        d = a / k - eps
        coeff = 2.0 * scale if k % 2 == 0 else 0.0
        for shift, sign in ((1.0 - c / eps, 1.0), (-c / eps, -1.0),
                            (-d / eps, -1.0), (-1.0 - d / eps, 1.0)):
            w1[row, 0] = 1.0 / eps
            b1[row] = shift
            w2[0, row] = coeff * sign
            row += 1
    hidden = Dense(2, n_units)
    hidden.W[:] = w1
    hidden.b[:] = b1
    head = Dense(n_units, 1)
    head.W[:] = w2
    head.b[:] = -scale
    return Network([hidden, ReLU(), head])


def predict_labels(net: Network, points: np.ndarray) -> np.ndarray:
    """Rounded sigmoid of the network logit: label 1 iff logit >= 0."""
    logits = net.forward(np.asarray(points, dtype=np.float64))
    return (logits[:, 0] >= 0.0).astype(np.int64)


def sample_stable_points(problem: Case1Problem, n: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Uniform samples of (stable region) x [0, 1]."""
    region = stable_region(problem)
    lengths = np.array([hi - lo for lo, hi in region])
    lows = np.array([lo for lo, _ in region])
    which = rng.choice(len(region), size=n, p=lengths / lengths.sum())
    x1 = lows[which] + rng.uniform(size=n) * lengths[which]
    x2 = rng.uniform(size=n)
    return np.column_stack([x1, x2])


@dataclass(frozen=True)
class StableCertificate:
    n_points: int
    n_errors: int
    n_subsets: int
    max_subset_loss: float
    eta: float

    @property
    def ok(self) -> bool:
        return self.n_errors == 0 and self.max_subset_loss <= self.eta


def certify_stable_network(problem: Case1Problem, eta: float, r: int,
                           n_points: int = 100_000, n_subsets: int = 100,
                           seed: int = 0) -> tuple[Network, StableCertificate]:
    """Build the stable network and check its two guarantees empirically.

    Classifies n_points uniform samples of (stable region) x [0, 1]
    (expected error count: zero) and evaluates the summed cross-entropy on
    n_subsets random size-r subsets (every value must stay <= eta).
    """
    net = build_stable_network(problem, eta, r)
    rng = np.random.default_rng(seed)
    pts = sample_stable_points(problem, n_points, rng)
    truth = parity_label(problem, pts[:, 0])
    errors = int(np.sum(predict_labels(net, pts) != truth))
    max_loss = 0.0
    for _ in range(n_subsets):
        sub = sample_stable_points(problem, r, rng)
        logits = net.forward(sub)[:, 0]
        labels = parity_label(problem, sub[:, 0])
        max_loss = max(max_loss, bce_with_logits(logits, labels, reduction="sum"))
    return net, StableCertificate(n_points, errors, n_subsets, max_loss, eta)


# ---------------------------------------------------------------------------
# Hand-designed perturbations
# ---------------------------------------------------------------------------

def _point_array(sample) -> np.ndarray:
    if isinstance(sample, LabeledPoint):
        return np.array([sample.x1, sample.x2])
    arr = np.asarray(sample, dtype=np.float64)
    if arr.shape != (2,):
        raise ParameterError(f"expected a 2-D point, got shape {arr.shape}")
    return arr


class ZeroX2Perturber:
    """Erase the second coordinate: (x1, x2) -> (x1, 0)."""

    name = "case1-zero-x2"

    def apply(self, sample):
        x = _point_array(sample)
        return x, np.array([x[0], 0.0])


class SetDeltaPerturber:
    """Plant the shortcut coordinate: (x1, x2) -> (x1, delta)."""

    name = "case1-add-delta"

    def __init__(self, delta: float):
        self.delta = float(delta)

    def apply(self, sample):
        x = _point_array(sample)
        return x, np.array([x[0], self.delta])


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainingSetSpec:
    name: str
    size: int
    lift: str
    batch_size: int

    @property
    def set_label(self) -> str:
        tag = "0" if self.lift == LIFT_ZERO else "delta"
        return f"T_{tag}^{self.size}"


def default_training_sets(fourth_lift: str = LIFT_ZERO) -> tuple[TrainingSetSpec, ...]:
    """The four standard runs: 7 and 5000 lifted, 5000 flat, 10000 as configured.

    fourth_lift may be "zero", "delta", or "both" (which appends a fifth
    run so both variants of the 10000-sample set are trained).
    """
    sets = [
        TrainingSetSpec("Psi1", 7, LIFT_DELTA, 7),
        TrainingSetSpec("Psi2", 5000, LIFT_ZERO, 50),
        TrainingSetSpec("Psi3", 5000, LIFT_DELTA, 50),
    ]
    if fourth_lift in (LIFT_ZERO, LIFT_DELTA):
        sets.append(TrainingSetSpec("Psi4", 10000, fourth_lift, 50))
    elif fourth_lift == "both":
        sets.append(TrainingSetSpec("Psi4", 10000, LIFT_ZERO, 50))
        sets.append(TrainingSetSpec("Psi4d", 10000, LIFT_DELTA, 50))
    else:
        raise ParameterError(f"fourth_lift must be zero/delta/both, got {fourth_lift!r}")
    return tuple(sets)


@dataclass(frozen=True)
class Experiment1Config:
    problem: Case1Problem = Case1Problem()
    sets: tuple[TrainingSetSpec, ...] = field(default_factory=default_training_sets)
    epochs: int = 30000
    grid_n: int = 2000
    threshold: float = 0.9
    seed: int = 0


@dataclass(frozen=True)
class NetResult:
    spec: TrainingSetSpec
    verdict: diagnostics.AttributionVerdict       # scored on the stable region
    full_grid: diagnostics.AttributionVerdict     # same agreements, whole grid
    pred_c0: np.ndarray
    pred_cdelta: np.ndarray
    epoch_mean_loss: np.ndarray
    final_train_bce_sum: float
    network: Network


@dataclass(frozen=True)
class Experiment1Report:
    config: Experiment1Config
    diag: DiagnosticSets
    results: tuple[NetResult, ...]
    artifacts: tuple[Path, ...] = ()


def hidden_width(problem: Case1Problem) -> int:
    return 4 * problem.K


def _train_one(problem, spec, epochs, seed_seq):
    data_rng, init_rng, shuffle_rng = (
        np.random.default_rng(s) for s in seed_seq.spawn(3)
    )
    points = sample_training_set(problem, spec.size, spec.lift, data_rng)
    x, y = points_to_arrays(points)
    width = hidden_width(problem)
    net = Network([Dense(2, width, init_rng), ReLU(), Dense(width, 1, init_rng)])

    def progress(epoch, mean_loss):
        if epochs >= 10 and (epoch + 1) % max(1, epochs // 10) == 0:
            log.info("%s (%s): epoch %d/%d mean batch loss %.3e",
                     spec.name, spec.set_label, epoch + 1, epochs, mean_loss)

    history = train(net, x, y, epochs=epochs, batch_size=spec.batch_size,
                    rng=shuffle_rng, progress=progress)
    n_batches = -(-spec.size // spec.batch_size)
    epoch_mean = (history.reshape(epochs, n_batches).mean(axis=1)
                  if epochs else history)
    final_sum = bce_with_logits(net.forward(x)[:, 0], y, reduction="sum")
    return net, history, epoch_mean, final_sum


def run_experiment_1(config: Experiment1Config,
                     out_dir: Path | None = None) -> Experiment1Report:
    """Train one network per configured set and attribute what each learned.

    Per network: predictions over both diagnostic grids, an attribution
    verdict at the configured threshold (scored on the stable-region part
    of the grids), the loss history, and the final summed training loss.
    When out_dir is given the prediction/summary/loss CSVs and serialized
    networks are written there.
    """
    problem = config.problem
    diag = diagnostic_sets(problem, config.grid_n)
    f_rule = lambda pts: parity_label(problem, pts[:, 0])
    g_rule = lambda pts: nonzero_x2_label(pts[:, 1])

    root = np.random.SeedSequence(config.seed)
    children = root.spawn(len(config.sets))
    results = []
    for spec, child in zip(config.sets, children):
        log.info("training %s on %s (batch %d, %d epochs)",
                 spec.name, spec.set_label, spec.batch_size, config.epochs)
        net, _, epoch_mean, final_sum = _train_one(problem, spec, config.epochs, child)
        predict = lambda pts: predict_labels(net, pts)
        verdict = diagnostics.classify_learned_structure(
            predict, diag.c0, diag.cdelta, f_rule, g_rule,
            mask=diag.in_stable, threshold=config.threshold,
        )
        full_grid = diagnostics.classify_learned_structure(
            predict, diag.c0, diag.cdelta, f_rule, g_rule,
            threshold=config.threshold,
        )
        results.append(NetResult(
            spec, verdict, full_grid,
            predict_labels(net, diag.c0), predict_labels(net, diag.cdelta),
            epoch_mean, final_sum, net,
        ))
        log.info("%s verdict: %s (g %.3f, f on C0 %.3f, f on Cdelta %.3f)",
                 spec.name, verdict.verdict, verdict.agreement_g,
                 verdict.agreement_f_c0, verdict.agreement_f_cdelta)

    artifacts = ()
    if out_dir is not None:
        artifacts = tuple(_write_artifacts(config, diag, results, Path(out_dir)))
    return Experiment1Report(config, diag, tuple(results), artifacts)


def _write_artifacts(config, diag, results, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [r.spec.name for r in results]

    cols = ["set", "x1", "x2", "f_a"] + [f"prediction_{n}" for n in names] + ["in_S_eps"]
    rows = []
    for set_name, grid, preds in (
        ("C0", diag.c0, [r.pred_c0 for r in results]),
        ("Cdelta", diag.cdelta, [r.pred_cdelta for r in results]),
    ):
        for i in range(len(grid)):
            rows.append([set_name, grid[i, 0], grid[i, 1], diag.labels[i]]
                        + [p[i] for p in preds] + [int(diag.in_stable[i])])
    yield write_csv(out_dir / "predictions.csv", cols, rows)

    summary_cols = ["network", "training_set", "samples", "lift", "batch_size",
                    "epochs", "seed", "verdict", "agreement_g", "agreement_f_C0",
                    "agreement_f_Cdelta", "agreement_g_full_grid",
                    "agreement_f_C0_full_grid", "agreement_f_Cdelta_full_grid",
                    "threshold", "final_train_bce_sum"]
    summary_rows = [
        [r.spec.name, r.spec.set_label, r.spec.size, r.spec.lift,
         r.spec.batch_size, config.epochs, config.seed, r.verdict.verdict,
         r.verdict.agreement_g, r.verdict.agreement_f_c0,
         r.verdict.agreement_f_cdelta, r.full_grid.agreement_g,
         r.full_grid.agreement_f_c0, r.full_grid.agreement_f_cdelta,
         r.verdict.threshold, r.final_train_bce_sum]
        for r in results
    ]
    yield write_csv(out_dir / "summary.csv", summary_cols, summary_rows)

    for r in results:
        yield write_csv(
            out_dir / f"loss_{r.spec.name}.csv",
            ["epoch", "mean_batch_bce"],
            [[i, v] for i, v in enumerate(r.epoch_mean_loss)],
        )
        path = out_dir / f"{r.spec.name.lower()}.fnet"
        save_network(r.network, path)
        yield path
