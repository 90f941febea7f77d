"""Command-line entry point.

Verbs: exp1, exp2, construct-stable, verify-false-structure, probe.
Settings resolve with precedence command line > config file > defaults;
the config file is flat `key = value` text with `#` comments.  Every run
validates its configuration before any computation, writes its artifacts
plus figures into the output directory, and finishes with a manifest
recording the configuration, seeds, and a checksum per artifact.

Exit codes: 0 success, 2 invalid configuration, 3 training divergence
(partial artifacts are kept next to a DIVERGED marker file).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import case1, case2, diagnostics, figures
from .errors import DivergedError, FalselabError
from .nn import load_network
from .reporting import write_csv, write_manifest, write_pgm

log = logging.getLogger(__name__)

DEFAULT_ROWS = ((0.009, 0.010), (0.008, 0.009), (0.007, 0.008), (0.006, 0.007))
PROBE_KINDS = ("case1-zero-x2", "case1-add-delta", "case2-family-swap")


@dataclass
class ExperimentConfig:
    experiment: str = "exp1"
    out: str = "runs"
    figures: bool = True
    # interval problem parameters
    a: int = 20
    K: int = 26
    epsilon: float = 1e-2
    delta: float = 1e-4
    # stable-network construction
    eta: float = 1e-3
    r: int = 7
    n_cert_points: int = 100_000
    n_cert_subsets: int = 100
    # training
    epochs: int | None = None  # per-experiment default: 30000 (exp1), 10 (exp2)
    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    fourth_lift: str = "zero"
    grid_n: int = 2000
    threshold: float = 0.9
    # stripe-image test sweep
    rows: tuple[tuple[float, float], ...] = DEFAULT_ROWS
    n_test: int = 1000
    dense_relu: bool = False
    dump_images: int = 4
    # verifier / probes
    budget: int = 4000
    severity_n: int = 10_000
    probe_kind: str = "case1-zero-x2"
    network: str | None = None
    baseline: str | None = None
    n_probe: int = 1000

    def resolved_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 30000 if self.experiment == "exp1" else 10

    def problem(self) -> case1.Case1Problem:
        return case1.Case1Problem(self.a, self.K, self.epsilon, self.delta)

    def items(self):
        # `out` is where the run lands, not what the run is; leaving it out
        # keeps manifests identical for identical experiments
        for f in dataclasses.fields(self):
            if f.name != "out":
                yield f.name, getattr(self, f.name)


def validate(config: ExperimentConfig) -> list[str]:
    """Every violated precondition, with the constraint it comes from."""
    bad = []
    needs_problem = config.experiment in ("exp1", "construct_stable", "verify", "probe")
    if needs_problem:
        bad += case1.problem_violations(config.a, config.K, config.epsilon,
                                        config.delta)
    if config.experiment not in ("exp1", "exp2", "construct_stable", "verify", "probe"):
        bad.append(f"unknown experiment {config.experiment!r}")
    if config.epochs is not None and config.epochs < 0:
        bad.append(f"epochs >= 0 required, got {config.epochs}")
    if config.grid_n < 2:
        bad.append(f"grid_n >= 2 required, got {config.grid_n}")
    if not 0.5 < config.threshold <= 1.0:
        bad.append(f"threshold in (0.5, 1] required, got {config.threshold}")
    if config.eta <= 0.0:
        bad.append(f"eta > 0 required, got {config.eta}")
    if config.r < 1:
        bad.append(f"r >= 1 required, got {config.r}")
    if config.fourth_lift not in ("zero", "delta", "both"):
        bad.append(f"fourth_lift must be zero/delta/both, got {config.fourth_lift!r}")
    if not config.seeds:
        bad.append("seeds must be nonempty")
    if config.n_test < 1:
        bad.append(f"n_test >= 1 required, got {config.n_test}")
    for b, c in config.rows:
        if not 0.0 < b < c:
            bad.append(f"0 < b < c required for every row, got ({b}, {c})")
    if config.budget < 1:
        bad.append(f"budget >= 1 required, got {config.budget}")
    if config.severity_n < 100:
        bad.append(f"severity_n >= 100 required, got {config.severity_n}")
    if config.experiment == "probe":
        if config.probe_kind not in PROBE_KINDS:
            bad.append(f"probe_kind must be one of {PROBE_KINDS}, got {config.probe_kind!r}")
        if config.baseline is None and config.network is None:
            bad.append("probe needs --network FILE or --baseline pixel-sum")
        if config.baseline is not None and config.baseline != "pixel-sum":
            bad.append(f"unknown baseline {config.baseline!r}")
        if config.baseline == "pixel-sum" and config.probe_kind != "case2-family-swap":
            bad.append("the pixel-sum baseline only applies to case2-family-swap")
        if config.network is not None and not Path(config.network).is_file():
            bad.append(f"network file not found: {config.network}")
    return bad


# ---------------------------------------------------------------------------
# Verb implementations
# ---------------------------------------------------------------------------

def _run_exp1(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    cfg = case1.Experiment1Config(
        problem=config.problem(),
        sets=case1.default_training_sets(config.fourth_lift),
        epochs=config.resolved_epochs(),
        grid_n=config.grid_n,
        threshold=config.threshold,
        seed=config.seed,
    )
    report = case1.run_experiment_1(cfg, out_dir=out_dir)
    artifacts = list(report.artifacts)
    if config.figures:
        artifacts.append(figures.experiment1_predictions(report, out_dir))
        artifacts.append(figures.experiment1_losses(report, out_dir))
    return artifacts


def _run_exp2(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    cfg = case2.Experiment2Config(
        rows=config.rows,
        seeds=config.seeds,
        epochs=config.resolved_epochs(),
        batch_size=60,
        n_test=config.n_test,
        dense_relu=config.dense_relu,
        dump_images=config.dump_images,
    )
    report = case2.run_experiment_2(cfg, out_dir=out_dir)
    artifacts = list(report.artifacts)
    if config.figures:
        artifacts.append(figures.experiment2_accuracy(report, out_dir))
        artifacts.append(figures.experiment2_samples(out_dir))
    return artifacts


def _run_construct_stable(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    problem = config.problem()
    net, cert = case1.certify_stable_network(
        problem, config.eta, config.r,
        n_points=config.n_cert_points, n_subsets=config.n_cert_subsets,
        seed=config.seed,
    )
    from .nn import save_network

    net_path = out_dir / "stable_network.fnet"
    out_dir.mkdir(parents=True, exist_ok=True)
    save_network(net, net_path)
    agreement = (cert.n_points - cert.n_errors) / cert.n_points
    cert_path = write_csv(
        out_dir / "certificate.csv",
        ["n_points", "n_errors", "grid_agreement", "n_subsets",
         "max_subset_bce_sum", "eta", "certified"],
        [[cert.n_points, cert.n_errors, agreement, cert.n_subsets,
          cert.max_subset_loss, cert.eta, int(cert.ok)]],
    )
    log.info("stable network: %d/%d correct, max subset loss %.3e (eta %.3e)",
             cert.n_points - cert.n_errors, cert.n_points,
             cert.max_subset_loss, cert.eta)
    artifacts = [net_path, cert_path]
    if config.figures:
        artifacts.append(figures.stable_network_response(problem, net, out_dir))
    return artifacts


def _run_verify(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = config.problem()
    rng = np.random.default_rng(config.seed)
    rows = []
    artifacts = []

    # Interval instance: planted x2 shortcut against the parity rule.
    f1 = case1_structure(problem)
    g1 = shortcut_structure()
    training = case1.sample_training_set(problem, config.r, "delta", rng)
    t_points = [np.array([p.x1, p.x2]) for p in training]
    grid = case1.diagnostic_sets(problem, config.grid_n).c0

    def c0_witnesses(budget):
        return [grid[i] for i in range(min(budget, len(grid)))]

    res1 = diagnostics.verify_false_structure(f1, g1, t_points, c0_witnesses,
                                              config.budget)
    sev1 = diagnostics.estimate_severity(
        f1, g1, lambda n: [grid[i] for i in rng.integers(0, len(grid), n)],
        config.severity_n)
    rows.append(["interval-shortcut", res1.status, len(t_points), res1.checked,
                 sev1.disagreement, sev1.half_width])
    if res1.witness is not None:
        artifacts.append(write_csv(
            out_dir / "witness_case1.csv", ["x1", "x2", "f", "g"],
            [[res1.witness[0], res1.witness[1],
              f1.label(res1.witness), g1.label(res1.witness)]]))

    # Stripe instance: pixel-sum rule against the orientation rule.
    f2 = case2_structure()
    g2 = pixel_sum_structure()
    t_imgs = [img for img, _ in case2.enumerate_training_set()]

    def hat_witnesses(budget):
        specs = case2.sample_test_specs(case2.FAMILY_HAT, 0.009, 0.01,
                                        budget, rng)
        return [case2.render(s) for s in specs]

    res2 = diagnostics.verify_false_structure(f2, g2, t_imgs, hat_witnesses,
                                              config.budget)
    sev2 = diagnostics.estimate_severity(
        f2, g2, lambda n: hat_witnesses(n), max(config.severity_n, 100))
    rows.append(["stripe-pixel-sum", res2.status, len(t_imgs), res2.checked,
                 sev2.disagreement, sev2.half_width])
    if res2.witness is not None:
        artifacts.append(write_pgm(out_dir / "witness_case2.pgm", res2.witness))

    artifacts.insert(0, write_csv(
        out_dir / "verification.csv",
        ["instance", "status", "training_points", "witness_candidates_checked",
         "severity_estimate", "severity_half_width"],
        rows))
    for row in rows:
        log.info("verify %s: %s (severity %.4f +/- %.4f)",
                 row[0], row[1], row[4], row[5])
    return artifacts


def case1_structure(problem) -> diagnostics.StructureOracle:
    return diagnostics.StructureOracle(
        name="interval-parity",
        labeler=lambda pt: case1.parity_label(problem, float(np.asarray(pt)[0])),
        predicate_descriptions=(
            "ceil(a/x1) is even", "ceil(a/x1) is odd",
        ),
    )


def shortcut_structure() -> diagnostics.StructureOracle:
    return diagnostics.StructureOracle(
        name="x2-shortcut",
        labeler=lambda pt: case1.nonzero_x2_label(float(np.asarray(pt)[1])),
        predicate_descriptions=("x2 is 0", "x2 is not 0"),
    )


def case2_structure() -> diagnostics.StructureOracle:
    return diagnostics.StructureOracle(
        name="stripe-orientation",
        labeler=case2.stripe_orientation,
        predicate_descriptions=(
            "has a light horizontal stripe", "has a light vertical stripe",
        ),
    )


def pixel_sum_structure() -> diagnostics.StructureOracle:
    return diagnostics.StructureOracle(
        name="pixel-sum",
        labeler=case2.pixel_sum_label,
        predicate_descriptions=(
            "pixel sum is <= 96", "pixel sum is > 96",
        ),
    )


def _run_probe(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = config.problem()
    rng = np.random.default_rng(config.seed)
    kind = config.probe_kind
    if kind in ("case1-zero-x2", "case1-add-delta"):
        diag = case1.diagnostic_sets(problem, config.grid_n)
        keep = np.flatnonzero(diag.in_stable)
        samples = [case1.LabeledPoint(diag.cdelta[i, 0], diag.cdelta[i, 1],
                                      int(diag.labels[i])) for i in keep]
        perturber = (case1.ZeroX2Perturber() if kind == "case1-zero-x2"
                     else case1.SetDeltaPerturber(problem.delta))
        net = load_network(config.network)
        predict = lambda pts: case1.predict_labels(net, pts)
        dataset_name = "cdelta-grid-stable"
    else:
        b, c = config.rows[0]
        samples = case2.sample_test_specs(case2.FAMILY_TILDE, b, c,
                                          config.n_probe, rng)
        perturber = case2.FamilySwapPerturber()
        if config.baseline == "pixel-sum":
            predict = lambda imgs: np.array(
                [case2.pixel_sum_label(im) for im in imgs])
        else:
            net = load_network(config.network)
            predict = lambda imgs: case2.predict_image_labels(net, imgs)
        dataset_name = f"tilde-samples[{b},{c}]"

    result = diagnostics.adversarial_probe(predict, samples, perturber)
    log.info("probe %s on %s: flip rate %.4f at max perturbation %.4g",
             kind, dataset_name, result.flip_rate, result.max_perturbation)
    path = write_csv(
        out_dir / "probe.csv",
        ["perturber", "dataset", "n", "flip_rate", "max_perturbation"],
        [[kind, dataset_name, result.n, result.flip_rate,
          result.max_perturbation]],
    )
    return [path]


_VERBS = {
    "exp1": _run_exp1,
    "exp2": _run_exp2,
    "construct_stable": _run_construct_stable,
    "verify": _run_verify,
    "probe": _run_probe,
}


def run(config: ExperimentConfig) -> int:
    """Validate, execute, and write the manifest.  Returns the exit code."""
    violations = validate(config)
    if violations:
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        artifacts = _VERBS[config.experiment](config, out_dir)
    except DivergedError as err:
        marker = out_dir / "DIVERGED"
        marker.write_text(f"{err}\n")
        existing = [p for p in out_dir.rglob("*") if p.is_file()
                    and p.name != "manifest.txt"]
        write_manifest(out_dir, list(config.items()), existing)
        print(f"training diverged: {err}", file=sys.stderr)
        return 3
    write_manifest(out_dir, list(config.items()), artifacts)
    return 0


# ---------------------------------------------------------------------------
# Argument and config-file handling
# ---------------------------------------------------------------------------

def parse_config_file(path) -> dict[str, str]:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FalselabError(f"bad config line (need key=value): {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _parse_rows(text: str):
    rows = []
    for chunk in text.split(","):
        b, _, c = chunk.partition(":")
        rows.append((float(b), float(c)))
    return tuple(rows)


def _parse_seeds(text: str):
    return tuple(int(s) for s in text.split(","))


_FIELD_PARSERS = {
    "rows": _parse_rows,
    "seeds": _parse_seeds,
    "figures": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "dense_relu": lambda s: s.lower() in ("1", "true", "yes", "on"),
}


def _coerce(field: dataclasses.Field, text: str):
    if field.name in _FIELD_PARSERS:
        return _FIELD_PARSERS[field.name](text)
    if field.type in ("int", "int | None"):
        return int(text)
    if field.type == "float":
        return float(text)
    return text


def build_config(experiment: str, args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig(experiment=experiment)
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if args.config:
        for key, text in parse_config_file(args.config).items():
            if key == "experiment":
                continue
            if key not in fields:
                raise FalselabError(f"unknown config key {key!r}")
            setattr(config, key, _coerce(fields[key], text))
    for name in fields:
        value = getattr(args, name, None)
        if value is not None and name != "experiment":
            setattr(config, name, value)
    if getattr(args, "no_figures", False):
        config.figures = False
    return config


def _add_common(sub):
    sub.add_argument("--config", help="flat key=value settings file")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip PNG figure rendering")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--quiet", action="store_true", help="warnings only")


def _add_problem(sub):
    sub.add_argument("--a", type=int, help="numerator of the interval rule")
    sub.add_argument("--K", type=int, help="largest interval index")
    sub.add_argument("--epsilon", type=float, help="stability margin")
    sub.add_argument("--delta", type=float, help="shortcut lift size")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="falselab",
        description="Shortcut-learning laboratory: experiments, constructions, diagnostics.",
    )
    subs = parser.add_subparsers(dest="verb", required=True)

    p1 = subs.add_parser("exp1", help="train on the interval task and attribute structures")
    _add_common(p1)
    _add_problem(p1)
    p1.add_argument("--epochs", type=int)
    p1.add_argument("--grid-n", dest="grid_n", type=int)
    p1.add_argument("--threshold", type=float)
    p1.add_argument("--fourth-lift", dest="fourth_lift",
                    choices=("zero", "delta", "both"))

    p2 = subs.add_parser("exp2", help="train on stripe images and sweep the test rows")
    _add_common(p2)
    p2.add_argument("--epochs", type=int)
    p2.add_argument("--seeds", type=_parse_seeds, help="comma-separated seed list")
    p2.add_argument("--rows", type=_parse_rows, help="b:c pairs, comma separated")
    p2.add_argument("--n-test", dest="n_test", type=int)
    p2.add_argument("--dense-relu", dest="dense_relu", action="store_const", const=True)
    p2.add_argument("--dump-images", dest="dump_images", type=int)

    p3 = subs.add_parser("construct-stable", help="build and certify the stable network")
    _add_common(p3)
    _add_problem(p3)
    p3.add_argument("--eta", type=float, help="summed-loss certificate bound")
    p3.add_argument("--r", type=int, help="certificate subset size")
    p3.add_argument("--n-cert-points", dest="n_cert_points", type=int)
    p3.add_argument("--n-cert-subsets", dest="n_cert_subsets", type=int)

    p4 = subs.add_parser("verify-false-structure",
                         help="run the false-structure verifier on both instances")
    _add_common(p4)
    _add_problem(p4)
    p4.add_argument("--r", type=int)
    p4.add_argument("--budget", type=int)
    p4.add_argument("--severity-n", dest="severity_n", type=int)
    p4.add_argument("--grid-n", dest="grid_n", type=int)

    p5 = subs.add_parser("probe", help="hand-designed adversarial perturbation probes")
    _add_common(p5)
    _add_problem(p5)
    p5.add_argument("--probe-kind", dest="probe_kind", choices=PROBE_KINDS)
    p5.add_argument("--network", help="serialized .fnet file to probe")
    p5.add_argument("--baseline", choices=("pixel-sum",))
    p5.add_argument("--n-probe", dest="n_probe", type=int)
    p5.add_argument("--grid-n", dest="grid_n", type=int)
    return parser


_VERB_TO_EXPERIMENT = {
    "exp1": "exp1",
    "exp2": "exp2",
    "construct-stable": "construct_stable",
    "verify-false-structure": "verify",
    "probe": "probe",
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    experiment = _VERB_TO_EXPERIMENT[args.verb]
    try:
        config = build_config(experiment, args)
    except FalselabError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    if getattr(args, "out", None) is None:
        config.out = str(Path("runs") / experiment)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
