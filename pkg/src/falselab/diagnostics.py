"""Deciding which structure a classifier actually implements.

A *structure* is a total labeling rule on a domain together with
human-readable predicate descriptions, one per label.  A rival structure
is a *false structure* for an original one, relative to a training set T,
when the two labelers agree everywhere on T yet disagree somewhere
outside it.  Agreement on T is decidable by enumeration; disagreement
outside T is existential, so the verifier below searches for a concrete
witness under an explicit sampling budget and reports `inconclusive`
rather than pretending to decide when none is found.

All operations here are pure functions of their inputs and safe to run
in parallel across datasets and perturbers.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError

VERIFIED = "verified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class StructureOracle:
    """A total deterministic labeler plus its predicate descriptions.

    predicate_descriptions[j] describes the region where the labeler
    returns j.  Predicates are unique by construction: a function returns
    exactly one label per point, so supports cannot intersect.  The
    optional domain_sampler draws points from the labeler's domain as
    sampler(n, rng) -> sequence of points.
    """

    name: str
    labeler: Callable
    predicate_descriptions: tuple[str, ...]
    domain_sampler: Callable | None = None

    def label(self, point) -> int:
        return int(self.labeler(point))


@dataclass(frozen=True)
class VerificationResult:
    status: str
    counterexample: object = None  # point of T where the labelers disagree
    witness: object = None         # point outside T where they disagree
    checked: int = 0               # witness candidates examined

    def __post_init__(self):
        if self.status == VERIFIED and self.witness is None:
            raise ParameterError("verified result requires a stored witness")


def verify_false_structure(f: StructureOracle, g: StructureOracle,
                           training_set: Sequence, witness_sampler: Callable,
                           budget: int) -> VerificationResult:
    """Check the two defining conditions of a false structure.

    Condition one: g and f agree on every training point (first failure is
    returned as `refuted` with the point).  Condition two: some point
    outside the training set gets different labels; witness_sampler(budget)
    supplies candidates.  Candidates that coincide with a training point
    are skipped.  No witness within the budget means `inconclusive`.
    """
    if len(training_set) == 0:
        raise ParameterError("training set must be nonempty")
    if budget < 1:
        raise ParameterError("witness budget must be >= 1")
    for point in training_set:
        if f.label(point) != g.label(point):
            return VerificationResult(REFUTED, counterexample=point)
    seen = {np.asarray(p, dtype=np.float64).tobytes() for p in training_set}
    checked = 0
    for cand in witness_sampler(budget):
        if checked >= budget:
            break
        checked += 1
        if np.asarray(cand, dtype=np.float64).tobytes() in seen:
            continue
        if f.label(cand) != g.label(cand):
            return VerificationResult(VERIFIED, witness=cand, checked=checked)
    return VerificationResult(INCONCLUSIVE, checked=checked)


@dataclass(frozen=True)
class SeverityEstimate:
    disagreement: float   # Monte-Carlo estimate of P{f != g} under the sampler
    half_width: float     # 95% normal-approximation confidence half-width
    n: int


def estimate_severity(f: StructureOracle, g: StructureOracle,
                      sampler: Callable, n: int) -> SeverityEstimate:
    """Estimate how much of the domain the two structures disagree on.

    sampler(n) yields the evaluation points; the estimate is the observed
    disagreement fraction under the sampler's law.
    """
    if n < 100:
        raise ParameterError("severity estimation needs n >= 100")
    points = sampler(n)
    disagreements = sum(1 for p in points if f.label(p) != g.label(p))
    p_hat = disagreements / n
    half = 1.96 * np.sqrt(p_hat * (1.0 - p_hat) / n)
    return SeverityEstimate(p_hat, float(half), n)


@dataclass(frozen=True)
class AttributionVerdict:
    verdict: str                 # "original" | "false" | "neither"
    agreement_g: float           # vs the rival labeler, on both grids pooled
    agreement_f_c0: float        # vs the true labeler on the flat grid
    agreement_f_cdelta: float    # vs the true labeler on the lifted grid
    threshold: float


def classify_learned_structure(predict: Callable, c0: np.ndarray,
                               cdelta: np.ndarray, f: Callable, g: Callable,
                               *, mask: np.ndarray | None = None,
                               threshold: float = 0.9) -> AttributionVerdict:
    """Attribute a classifier to the original structure, the rival, or neither.

    c0 and cdelta are (n, 2) point grids paired row-by-row through their
    first coordinate.  predict/f/g map an (n, 2) array to n labels.  The
    verdict is `false` when predictions match g on at least `threshold` of
    the pooled grids, `original` when they match f on at least `threshold`
    of each grid separately, else `neither`.  With a threshold above 0.5
    the two rules cannot both fire: f and g disagree on every flat-grid
    point that f labels 1.  The optional mask restricts scoring to rows
    inside the stable region.
    """
    c0 = np.asarray(c0, dtype=np.float64)
    cdelta = np.asarray(cdelta, dtype=np.float64)
    if not 0.5 < threshold <= 1.0:
        raise ParameterError("threshold must lie in (0.5, 1]")
    if c0.shape != cdelta.shape or not np.array_equal(c0[:, 0], cdelta[:, 0]):
        raise ParameterError("c0 and cdelta must be paired by first coordinate")
    if mask is None:
        mask = np.ones(len(c0), dtype=bool)
    p0 = np.asarray(predict(c0))[mask]
    pd = np.asarray(predict(cdelta))[mask]
    f0 = np.asarray(f(c0))[mask]
    fd = np.asarray(f(cdelta))[mask]
    g0 = np.asarray(g(c0))[mask]
    gd = np.asarray(g(cdelta))[mask]
    agree_g = float(np.concatenate([p0 == g0, pd == gd]).mean())
    agree_f0 = float((p0 == f0).mean())
    agree_fd = float((pd == fd).mean())
    if agree_g >= threshold:
        verdict = "false"
    elif agree_f0 >= threshold and agree_fd >= threshold:
        verdict = "original"
    else:
        verdict = "neither"
    return AttributionVerdict(verdict, agree_g, agree_f0, agree_fd, threshold)


@dataclass(frozen=True)
class ProbeResult:
    flip_rate: float
    max_perturbation: float  # infinity norm over the probed inputs
    n: int


def adversarial_probe(predict: Callable, samples: Sequence,
                      perturber) -> ProbeResult:
    """Fraction of samples whose predicted label flips under a perturbation.

    perturber.apply(sample) must return the original and perturbed input
    arrays; predict maps a stacked input array to labels.
    """
    if len(samples) == 0:
        raise ParameterError("probe needs at least one sample")
    pairs = [perturber.apply(s) for s in samples]
    originals = np.stack([p[0] for p in pairs])
    perturbed = np.stack([p[1] for p in pairs])
    before = np.asarray(predict(originals))
    after = np.asarray(predict(perturbed))
    flips = float(np.mean(before != after))
    size = float(np.max(np.abs(perturbed - originals)))
    return ProbeResult(flips, size, len(samples))
