"""Experiment configuration, runners, and on-disk artifacts.

A run is described by a flat key-value config file::

    # comment lines start with '#'; blank lines are ignored
    task = separate            # separate | colorize | train-scorenet |
                               # eval | grad-experiment | ablation
    dataset = toy              # toy | toy-color | toy-line | idx:<path>
    prior = empirical          # empirical | gaussian | gmm | scorenet:<path>
    k = 2
    alpha = equal              # or comma-separated floats, one per component
    cases = 10
    seed = 0
    out = run-out

Every line is ``key = value`` (first '=' splits); keys are validated against
a closed table, so a typo fails parsing with the offending key named, never
a partial run.  See :data:`CONFIG_KEYS` for the full table with defaults.

:func:`run_experiment` executes a parsed config and writes all artifacts
under the output directory: separated component and mixture images (PGM /
PPM), per-step trace tables (CSV), a metrics report (JSON, floats at 17
significant digits so reruns are byte-identical), trained weights (BSN1),
and finally ``manifest.json`` listing every artifact with its SHA-256 hash.
Independent cases fan out to a process pool (``jobs``); all file writes
happen in the parent after the pool completes.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    AnnealConfig,
    BasisError,
    NoiseSchedule,
    RngStream,
    Signal,
    geometric_schedule,
)
from .dataio import read_idx, write_pnm
from .metrics import (
    MetricReport,
    grad_proportionality_experiment,
    log_density_report,
    mmd_rbf,
    summarize_separation,
)
from .priors import EmpiricalDiracPrior, IsotropicGaussianPrior
from .sampler import (
    ComponentSet,
    SamplerConfig,
    Trace,
    basis_separate,
    baseline_ascend,
    best_of_n,
    posterior_log_density,
)
from .scorenet import (
    DsmConfig,
    ScoreNet,
    ScoreNetPrior,
    load_weights,
    save_weights,
    train_dsm,
)
from .tasks import (
    MixtureCase,
    average_baseline,
    channel_collapse,
    linear_sum,
    make_mixture_set,
)
from .toys import (
    two_basin_benchmark,
    toy_color_images,
    toy_gmm_2d,
    toy_images,
    toy_line_images,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "CONFIG_KEYS",
    "TASKS",
    "parse_config",
    "load_config",
    "emit_metrics",
    "write_trace_csv",
    "run_experiment",
]

logger = logging.getLogger("basis_sep.experiments")

TASKS = (
    "separate",
    "colorize",
    "train-scorenet",
    "eval",
    "grad-experiment",
    "ablation",
)

DATASETS = ("toy", "toy-color", "toy-line")
PRIORS = ("empirical", "gaussian", "gmm")
PAIRINGS = ("class-agnostic", "class-split")
METHODS = ("basis", "average")


class ConfigError(BasisError):
    """A config line failed validation; the message names the key."""


def _parse_alpha(raw: str):
    if raw == "equal":
        return "equal"
    try:
        values = tuple(float(tok) for tok in raw.split(","))
    except ValueError:
        raise ConfigError(f"alpha: expected 'equal' or comma floats, got {raw!r}") from None
    if not values or any(not math.isfinite(v) for v in values):
        raise ConfigError(f"alpha: weights must be finite, got {raw!r}")
    return values

def _parse_hidden(raw: str):
    try:
        values = tuple(int(tok) for tok in raw.split(","))
    except ValueError:
        raise ConfigError(f"hidden: expected comma integers, got {raw!r}") from None
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"hidden: layer widths must be positive, got {raw!r}")
    return values

def _parse_gamma2(raw: str):
    if raw == "coupled":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"gamma2: expected 'coupled' or a float, got {raw!r}") from None
    if value <= 0 or not math.isfinite(value):
        raise ConfigError(f"gamma2: must be positive and finite, got {raw!r}")
    return value


def _positive(kind, name):
    def convert(raw: str):
        try:
            value = kind(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected {kind.__name__}, got {raw!r}") from None
        if value <= 0 or (kind is float and not math.isfinite(value)):
            raise ConfigError(f"{name}: must be positive, got {raw!r}")
        return value
    return convert

def _non_negative_int(name):
    def convert(raw: str):
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected integer, got {raw!r}") from None
        if value < 0:
            raise ConfigError(f"{name}: must be >= 0, got {raw!r}")
        return value
    return convert

def _choice(options, name):
    def convert(raw: str):
        if raw not in options:
            raise ConfigError(f"{name}: expected one of {', '.join(options)}, got {raw!r}")
        return raw
    return convert

def _dataset_value(raw: str):
    if raw in DATASETS or raw.startswith("idx:"):
        return raw
    raise ConfigError(
        f"dataset: expected one of {', '.join(DATASETS)} or idx:<path>, got {raw!r}"
    )

def _prior_value(raw: str):
    if raw in PRIORS or raw.startswith("scorenet:"):
        return raw
    raise ConfigError(
        f"prior: expected one of {', '.join(PRIORS)} or scorenet:<path>, got {raw!r}"
    )


_REQUIRED = object()

# key -> (converter, default); defaults are stored already converted.
CONFIG_KEYS = {
    "task": (_choice(TASKS, "task"), _REQUIRED),
    "dataset": (_dataset_value, "toy"),
    "labels": (str, ""),
    "count": (_positive(int, "count"), 10),
    "prior": (_prior_value, "empirical"),
    "k": (_positive(int, "k"), 2),
    "alpha": (_parse_alpha, "equal"),
    "schedule_first": (_positive(float, "schedule_first"), 1.0),
    "schedule_last": (_positive(float, "schedule_last"), 0.01),
    "schedule_levels": (_positive(int, "schedule_levels"), 10),
    "delta": (_positive(float, "delta"), 2e-5),
    "steps": (_positive(int, "steps"), 100),
    "gamma2": (_parse_gamma2, None),
    "seed": (_non_negative_int("seed"), 0),
    "out": (str, "run-out"),
    "cases": (_positive(int, "cases"), 10),
    "best_of": (_positive(int, "best_of"), 1),
    "pairing": (_choice(PAIRINGS, "pairing"), "class-agnostic"),
    "method": (_choice(METHODS, "method"), "basis"),
    "samples_per_level": (_positive(int, "samples_per_level"), 2000),
    "epochs": (_non_negative_int("epochs"), 100),
    "learning_rate": (_positive(float, "learning_rate"), 1e-3),
    "batch": (_positive(int, "batch"), 128),
    "train_samples": (_positive(int, "train_samples"), 30000),
    "hidden": (_parse_hidden, (128, 128)),
    "gaussian_mean": (float, 0.0),
    "gaussian_variance": (_positive(float, "gaussian_variance"), 1.0),
    "ascent_lambda": (_positive(float, "ascent_lambda"), 50.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run description; field per config key."""

    task: str
    dataset: str = "toy"
    labels: str = ""
    count: int = 10
    prior: str = "empirical"
    k: int = 2
    alpha: object = "equal"
    schedule_first: float = 1.0
    schedule_last: float = 0.01
    schedule_levels: int = 10
    delta: float = 2e-5
    steps: int = 100
    gamma2: float | None = None
    seed: int = 0
    out: str = "run-out"
    cases: int = 10
    best_of: int = 1
    pairing: str = "class-agnostic"
    method: str = "basis"
    samples_per_level: int = 2000
    epochs: int = 100
    learning_rate: float = 1e-3
    batch: int = 128
    train_samples: int = 30000
    hidden: tuple = (128, 128)
    gaussian_mean: float = 0.0
    gaussian_variance: float = 1.0
    ascent_lambda: float = 50.0

    def schedule(self) -> NoiseSchedule:
        if self.schedule_levels == 1:
            return NoiseSchedule(np.array([self.schedule_last]))
        return geometric_schedule(self.schedule_first, self.schedule_last,
                                  self.schedule_levels)

    def anneal(self) -> AnnealConfig:
        return AnnealConfig(delta=self.delta, steps_per_level=self.steps,
                            seed=self.seed, gamma2=self.gamma2)

    def alpha_vector(self) -> np.ndarray:
        if self.alpha == "equal":
            return np.full(self.k, 1.0 / self.k)
        values = np.asarray(self.alpha, dtype=float)
        if values.size != self.k:
            raise ConfigError(
                f"alpha: need {self.k} weights, got {values.size}"
            )
        return values

    def with_overrides(self, seed=None, out=None) -> "ExperimentConfig":
        updates = {}
        if seed is not None:
            updates["seed"] = int(seed)
        if out is not None:
            updates["out"] = str(out)
        return dataclasses.replace(self, **updates) if updates else self


def parse_config(text: str, default_task: str | None = None) -> ExperimentConfig:
    """Parse and fully validate flat key-value config text.

    Raises :class:`ConfigError` naming the first offending line or key;
    never returns a partially-valid config.  ``default_task`` (from the CLI
    subcommand) fills in a missing ``task`` line; when both are present they
    must agree.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        converter, _ = CONFIG_KEYS[key]
        values[key] = converter(raw)
    if default_task is not None:
        if default_task not in TASKS:
            raise ConfigError(f"task: expected one of {', '.join(TASKS)}, "
                              f"got {default_task!r}")
        if "task" in values and values["task"] != default_task:
            raise ConfigError(
                f"task: config says {values['task']!r} but the subcommand "
                f"is {default_task!r}"
            )
        values["task"] = default_task
    if "task" not in values:
        raise ConfigError("missing required key 'task'")
    for key, (_, default) in CONFIG_KEYS.items():
        if key not in values:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default
    config = ExperimentConfig(**values)
    _validate_cross_fields(config)
    return config


def _validate_cross_fields(config: ExperimentConfig) -> None:
    if config.alpha != "equal":
        config.alpha_vector()
    if config.dataset.startswith("idx:"):
        path = config.dataset[len("idx:"):]
        if not path or not Path(path).exists():
            raise ConfigError(f"dataset: idx file not found: {path!r}")
    if config.labels and not Path(config.labels).exists():
        raise ConfigError(f"labels: file not found: {config.labels!r}")
    if config.prior.startswith("scorenet:"):
        path = config.prior[len("scorenet:"):]
        if not path or not Path(path).exists():
            raise ConfigError(f"prior: weights file not found: {path!r}")
    if config.schedule_levels >= 2 and config.schedule_first < config.schedule_last:
        raise ConfigError("schedule_first must be >= schedule_last")
    if config.pairing == "class-split" and not config.labels:
        raise ConfigError("pairing class-split requires a labels file")
    if config.task == "colorize" and config.method == "average":
        raise ConfigError("method average applies to weighted-sum mixing only")


def load_config(path, default_task: str | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), default_task=default_task)


# --------------------------------------------------------------------------
# JSON metrics with exact float round-trips


def _json_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(key))}: {_json_text(value, indent + 1)}'
            for key, value in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad}  {_json_text(value, indent + 1)}" for value in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise ValueError(f"metrics must be finite, got {value}")
        return format(value, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__} into metrics JSON")


def emit_metrics(report, path) -> None:
    """Write a metrics report as JSON with floats at 17 significant digits.

    ``report`` is a :class:`~basis_sep.metrics.MetricReport` or a plain
    mapping.  Field order is fixed by construction order and None-valued
    optional fields are dropped, so identical runs serialize to identical
    bytes.
    """
    if isinstance(report, MetricReport):
        mapping = dataclasses.asdict(report)
    else:
        mapping = dict(report)
    mapping = {k: v for k, v in mapping.items() if v is not None}
    text = _json_text(mapping) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def write_trace_csv(trace: Trace, path) -> None:
    """Per-step trace table: level, step, eta, residual norm, SNR terms."""
    recon = np.sqrt(trace.recon_sq)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("level,step,eta,recon_error,prior_sq,likelihood_sq,snr\n")
        for i in range(trace.level.size):
            fh.write(
                f"{int(trace.level[i])},{int(trace.step[i])},"
                f"{format(float(trace.eta[i]), '.17g')},"
                f"{format(float(recon[i]), '.17g')},"
                f"{format(float(trace.prior_sq[i]), '.17g')},"
                f"{format(float(trace.like_sq[i]), '.17g')},"
                f"{format(float(trace.snr[i]), '.17g')}\n"
            )


# --------------------------------------------------------------------------
# config -> dataset / prior / operator


def _build_dataset(config: ExperimentConfig):
    """Returns (signals, labels-or-None) for the configured dataset."""
    if config.dataset == "toy":
        return toy_images(config.count, seed=config.seed + 17), None
    if config.dataset == "toy-color":
        return toy_color_images(config.count, seed=config.seed + 17), None
    if config.dataset == "toy-line":
        return toy_line_images(config.count), None
    path = config.dataset[len("idx:"):]
    if config.labels:
        images, labels = read_idx(path, config.labels)
        return images, labels
    return read_idx(path), None


def _dataset_rows(signals) -> np.ndarray:
    return np.stack([s.data for s in signals])


def _build_prior(config: ExperimentConfig, signals, component_shape):
    if config.prior == "empirical":
        return EmpiricalDiracPrior(_dataset_rows(signals), component_shape)
    if config.prior == "gaussian":
        return IsotropicGaussianPrior(config.gaussian_mean,
                                      config.gaussian_variance, component_shape)
    if config.prior == "gmm":
        prior = toy_gmm_2d()
        if tuple(component_shape) != prior.shape:
            raise ConfigError(
                f"prior gmm is {prior.shape}-shaped; task needs {tuple(component_shape)}"
            )
        return prior
    path = config.prior[len("scorenet:"):]
    net = load_weights(path)
    return ScoreNetPrior(net, config.schedule(), shape=component_shape)


def _case_name(index: int) -> str:
    return f"case{index:04d}"


# --------------------------------------------------------------------------
# separation-style tasks (separate, colorize, eval), parallel over cases


def _colorize_cases(config: ExperimentConfig, signals, op):
    """One case per drawn color image: ground truth color, gray mixture."""
    rng = np.random.default_rng(config.seed)
    picks = rng.integers(0, len(signals), size=config.cases)
    cases = []
    for i in picks:
        truth = signals[int(i)].data[None, :]
        gray = op.apply(truth)
        cases.append(MixtureCase(
            mixture=Signal(gray, op.mixture_shape),
            ground_truth=ComponentSet(truth.copy(), op.component_shape),
            pairing="class-agnostic",
            source_indices=(int(i),),
        ))
    return cases


def _separation_setup(config: ExperimentConfig):
    signals, labels = _build_dataset(config)
    shape = signals[0].shape
    if config.task == "colorize":
        if shape[0] != 3:
            raise ConfigError(f"colorize needs a 3-channel dataset, got shape {shape}")
        op = channel_collapse(shape)
        cases = _colorize_cases(config, signals, op)
        prior = _build_prior(config, signals, op.component_shape)
        return signals, op, cases, prior
    op = linear_sum(config.alpha_vector(), shape)
    groups = None
    if config.pairing == "class-split":
        if labels is None:
            raise ConfigError("pairing class-split requires labels")
        uniq = np.unique(labels)
        if uniq.size < config.k:
            raise ConfigError(
                f"class-split needs >= {config.k} distinct labels, found {uniq.size}"
            )
        split = np.array_split(uniq, config.k)
        groups = [np.asarray(g) for g in split]
    entries = signals if labels is None else list(zip(signals, labels))
    cases = make_mixture_set(entries, config.cases, op, seed=config.seed,
                             pairing=config.pairing, groups=groups)
    prior = _build_prior(config, signals, op.component_shape)
    return signals, op, cases, prior


def _run_one_case(config: ExperimentConfig, index: int):
    """Worker body: separate one mixture; returns arrays for the writer."""
    signals, op, cases, prior = _separation_setup(config)
    case = cases[index]
    rng = RngStream(config.seed)
    sampler_config = SamplerConfig(config.schedule(), config.anneal())
    trace = None
    if config.method == "average":
        estimate = average_baseline(case.mixture, op)
    elif config.best_of > 1:
        estimate = best_of_n(prior, op, case.mixture, config.best_of,
                             sampler_config, rng, chain_base=index * config.best_of)
    else:
        estimate, trace = basis_separate(prior, op, case.mixture,
                                         sampler_config, rng, chain=index)
    logger.info("case %d/%d done", index + 1, config.cases)
    return index, estimate, trace


def _pool_map(config: ExperimentConfig, jobs: int, indices):
    if jobs == 1:
        return [_run_one_case(config, i) for i in indices]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_one_case, config, i) for i in indices]
        results = [f.result() for f in futures]
    results.sort(key=lambda item: item[0])
    return results


def _run_separation_task(config: ExperimentConfig, out: Path, jobs: int) -> dict:
    signals, op, cases, prior = _separation_setup(config)
    results = _pool_map(config, jobs, range(len(cases)))
    estimates = [est for _, est, _ in results]

    artifacts = {}
    for index, estimate, trace in results:
        name = _case_name(index)
        case = cases[index]
        artifacts[f"{name}_mixture.{_pnm_ext(case.mixture)}"] = case.mixture
        for j, comp in enumerate(estimate.signals()):
            artifacts[f"{name}_component{j}.{_pnm_ext(comp)}"] = comp
        if index == 0 and trace is not None:
            artifacts["trace.csv"] = trace

    extra = {}
    if config.task == "eval":
        extra = _eval_extras(config, signals, op, cases, estimates, prior)
    report = summarize_separation(cases, estimates, op, **extra)
    for name, value in artifacts.items():
        target = out / name
        if isinstance(value, Trace):
            write_trace_csv(value, target)
        else:
            write_pnm(target, value)
    emit_metrics(report, out / "metrics.json")
    return {"cases": len(cases)}


def _pnm_ext(signal: Signal) -> str:
    return "pgm" if signal.shape[0] == 1 else "ppm"


def _eval_extras(config, signals, op, cases, estimates, prior) -> dict:
    """Optional report fields: sample-quality MMD and prior log-density."""
    extra = {}
    held_out = toy_images(max(64, config.count), seed=config.seed + 101,
                          shape=signals[0].shape)
    held_rows = _dataset_rows(held_out)
    separated = np.concatenate([e.components for e in estimates], axis=0)
    averaged = np.concatenate(
        [average_baseline(c.mixture, op).components for c in cases], axis=0
    )
    extra["mmd"] = mmd_rbf(separated, held_rows)
    extra["mmd_average"] = mmd_rbf(averaged, held_rows)
    if prior.has_log_density:
        mean_out, mean_test = log_density_report(
            prior, estimates, _dataset_rows(signals), config.schedule_last
        )
        extra["log_density_outputs"] = mean_out
        extra["log_density_test"] = mean_test
    return extra


# --------------------------------------------------------------------------
# the other tasks


def _run_train_scorenet(config: ExperimentConfig, out: Path) -> dict:
    prior = toy_gmm_2d()
    rng = np.random.default_rng(config.seed)
    train = prior.sample(0.0, config.train_samples, rng)
    schedule = config.schedule()
    net = ScoreNet.initialize(prior.dim, schedule.levels, hidden=config.hidden,
                              seed=config.seed, scales=1.0 / schedule.sigmas)
    dsm = DsmConfig(schedule, batch_size=config.batch,
                    learning_rate=config.learning_rate, epochs=config.epochs,
                    seed=config.seed)
    trained, report = train_dsm(net, train, dsm)
    save_weights(trained, out / "scorenet.bsn1")

    with open(out / "loss.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(report.epoch_losses):
            fh.write(f"{epoch},{format(float(loss), '.17g')}\n")

    test_rng = np.random.default_rng(config.seed + 1)
    cosines = []
    for level, sigma in enumerate(schedule.sigmas):
        xs = prior.sample(float(sigma), 3000, test_rng)
        exact = prior.score(xs, float(sigma))
        approx = trained.forward(xs, level)
        num = np.sum(exact * approx, axis=1)
        den = np.maximum(
            np.linalg.norm(exact, axis=1) * np.linalg.norm(approx, axis=1), 1e-300
        )
        cosines.append(float(np.mean(num / den)))
    metrics = {
        "task": "train-scorenet",
        "initial_loss": report.initial_loss,
        "final_loss": float(report.epoch_losses[-1]) if report.epoch_losses.size else None,
        "steps": report.steps,
        "per_level_cosine": cosines,
        "min_cosine": min(cosines),
    }
    emit_metrics(metrics, out / "metrics.json")
    return {"steps": report.steps}


def _run_grad_experiment(config: ExperimentConfig, out: Path) -> dict:
    signals, _ = _build_dataset(config)
    shape = signals[0].shape
    prior = _build_prior(config, signals, shape)
    schedule = config.schedule()
    rng = np.random.default_rng(config.seed)
    dataset = None if prior.has_sampling else _dataset_rows(signals)
    values = grad_proportionality_experiment(prior, schedule,
                                             config.samples_per_level, rng,
                                             dataset=dataset)
    with open(out / "grad_experiment.csv", "w", encoding="utf-8") as fh:
        fh.write("level,sigma,sigma_rms_score\n")
        for level, (sigma, value) in enumerate(zip(schedule.sigmas, values)):
            fh.write(f"{level},{format(float(sigma), '.17g')},"
                     f"{format(float(value), '.17g')}\n")
    metrics = {
        "task": "grad-experiment",
        "dim": prior.dim,
        "sqrt_dim": math.sqrt(prior.dim),
        "sigma": [float(s) for s in schedule.sigmas],
        "sigma_rms_score": [float(v) for v in values],
    }
    emit_metrics(metrics, out / "metrics.json")
    return {"levels": schedule.levels}


def _ablation_one_seed(config: ExperimentConfig, seed: int):
    bench = two_basin_benchmark()
    sampler_config = SamplerConfig(
        config.schedule(),
        config.anneal(),
        init=bench.initial_state(seed),
    )
    rng = RngStream(seed)
    results = {}
    traces = {}
    runs = {
        "langevin": lambda: basis_separate(
            bench.prior, bench.operator, bench.mixture, sampler_config, rng),
        "annealed-deterministic": lambda: baseline_ascend(
            bench.prior, bench.operator, bench.mixture, sampler_config, rng,
            mode="annealed-deterministic"),
        "plain-ascent": lambda: baseline_ascend(
            bench.prior, bench.operator, bench.mixture, sampler_config, rng,
            mode="plain-ascent", lam=config.ascent_lambda),
    }
    sigma_last = float(config.schedule().sigmas[-1])
    gamma2_last = config.anneal().gamma2_at(sigma_last)
    for name, run in runs.items():
        components, trace = run()
        results[name] = posterior_log_density(
            bench.prior, bench.operator, bench.mixture, components,
            sigma_last, gamma2_last)
        traces[name] = trace
    return results, traces


def _run_ablation(config: ExperimentConfig, out: Path, jobs: int) -> dict:
    seeds = list(range(config.seed, config.seed + config.cases))
    if jobs == 1:
        rows = [_ablation_one_seed(config, s) for s in seeds]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_ablation_one_seed, config, s) for s in seeds]
            rows = [f.result() for f in futures]
    ordered = 0
    with open(out / "ablation.csv", "w", encoding="utf-8") as fh:
        fh.write("seed,langevin,annealed_deterministic,plain_ascent,ordered\n")
        for seed, (values, _) in zip(seeds, rows):
            hit = (values["langevin"] > values["annealed-deterministic"]
                   > values["plain-ascent"])
            ordered += int(hit)
            fh.write(
                f"{seed},{format(values['langevin'], '.17g')},"
                f"{format(values['annealed-deterministic'], '.17g')},"
                f"{format(values['plain-ascent'], '.17g')},{int(hit)}\n"
            )
    for name, trace in rows[0][1].items():
        write_trace_csv(trace, out / f"trace_{name}.csv")
    metrics = {
        "task": "ablation",
        "seeds": len(seeds),
        "ordering_holds": ordered,
        "ordering_fraction": ordered / len(seeds),
    }
    emit_metrics(metrics, out / "metrics.json")
    return {"ordering_fraction": ordered / len(seeds)}


# --------------------------------------------------------------------------
# entry point


def _write_manifest(out: Path) -> None:
    entries = []
    for path in sorted(out.rglob("*")):
        if not path.is_file() or path.name == "manifest.json":
            continue
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        entries.append({
            "path": str(path.relative_to(out)),
            "sha256": digest,
            "bytes": path.stat().st_size,
        })
    text = _json_text({"artifacts": entries}) + "\n"
    (out / "manifest.json").write_text(text, encoding="utf-8")


def run_experiment(config: ExperimentConfig, jobs: int | None = None) -> Path:
    """Execute one experiment; returns the output directory.

    Deterministic given (config, seed): rerunning writes byte-identical
    metrics.  ``jobs`` sizes the case-level process pool (default: available
    parallelism); outputs are written by this process only, after all
    workers complete.
    """
    if jobs is None:
        jobs = os.cpu_count() or 1
    jobs = max(1, int(jobs))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("task %s -> %s (jobs=%d)", config.task, out, jobs)
    if config.task in ("separate", "colorize", "eval"):
        summary = _run_separation_task(config, out, jobs)
    elif config.task == "train-scorenet":
        summary = _run_train_scorenet(config, out)
    elif config.task == "grad-experiment":
        summary = _run_grad_experiment(config, out)
    elif config.task == "ablation":
        summary = _run_ablation(config, out, jobs)
    else:  # unreachable after config validation
        raise ConfigError(f"unknown task {config.task!r}")
    _write_manifest(out)
    logger.info("done: %s", summary)
    return out
