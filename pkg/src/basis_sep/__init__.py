"""Posterior sampling over the components of a linear signal mixture.

Given an observed mixture ``m = g(x_1, ..., x_k)`` of k signals under a known
linear map g, this package draws the components jointly from the posterior
p(x | m) by noise-annealed Langevin dynamics: each component follows the
score of its own prior smoothed at a decreasing noise scale, plus the
gradient of a soft mixture-constraint term, plus injected Gaussian noise.
Any prior that can report the score of its noise-smoothed density plugs in:
exact closed forms (isotropic Gaussian, Gaussian mixture, point masses on a
dataset) or a trained noise-conditioned score network.

Modules
-------
core
    Signals, noise schedules, step sizes, counter-based RNG streams, errors.
priors
    Closed-form smoothed priors and the ``ScorePrior`` interface.
sampler
    The annealed Langevin sampler, deterministic ascent baselines,
    best-of-n selection, per-step traces.
tasks
    Mixing operators (weighted sum, channel collapse), mixture-case
    generation, the scaled-copy baseline.
scorenet
    Noise-conditioned MLP score model: training, weight files, prior
    adapter.
metrics
    PSNR, component matching, tuple-posterior oracle and total variation,
    MMD, log-density reports, gradient-magnitude experiments.
toys
    Small deterministic fixtures used by the demos and tests.
dataio
    IDX and PGM/PPM file formats.
experiments / cli
    Config-driven experiment runner and the ``basis`` command.
"""

from .core import (
    AnnealConfig,
    BasisError,
    DegenerateDensityError,
    FormatError,
    LogDensityUnavailableError,
    NoiseSchedule,
    RngStream,
    SamplerDivergedError,
    Signal,
    TrainingDivergedError,
    UnsupportedOperatorError,
    UnsupportedPriorError,
    UnsupportedSizeError,
    geometric_schedule,
    signal_from_array,
    step_size,
)
from .dataio import read_idx, read_idx_images, read_idx_labels, read_pnm, write_pnm
from .experiments import (
    ConfigError,
    ExperimentConfig,
    emit_metrics,
    load_config,
    parse_config,
    run_experiment,
    write_trace_csv,
)
from .metrics import (
    MetricReport,
    TuplePosterior,
    empirical_tuple_distribution,
    grad_proportionality_experiment,
    log_density_report,
    match_components,
    mmd_rbf,
    psnr,
    reconstruction_error,
    snap_components,
    summarize_separation,
    tuple_posterior_oracle,
    tv_distance,
)
from .priors import (
    EmpiricalDiracPrior,
    GmmPrior,
    IsotropicGaussianPrior,
    ScorePrior,
    empirical_prior,
    gaussian_score,
    gmm_noisy_log_density,
    gmm_noisy_score,
)
from .sampler import (
    ANNEALED_DETERMINISTIC,
    PLAIN_ASCENT,
    ComponentSet,
    SamplerConfig,
    Trace,
    baseline_ascend,
    basis_separate,
    best_of_n,
    langevin_step,
    likelihood_grad,
    posterior_log_density,
    snr_trace,
)
from .scorenet import (
    DsmConfig,
    ScoreNet,
    ScoreNetPrior,
    TrainReport,
    dsm_loss_and_grad,
    dsm_pointwise_loss,
    load_weights,
    save_weights,
    scorenet_forward,
    train_dsm,
)
from .tasks import (
    MixingOperator,
    MixtureCase,
    average_baseline,
    channel_collapse,
    linear_sum,
    make_mixture_set,
    mix,
)
from .toys import (
    TwoBasinBenchmark,
    toy_color_images,
    toy_gmm_2d,
    toy_images,
    toy_line_images,
    two_basin_benchmark,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealConfig",
    "ANNEALED_DETERMINISTIC",
    "BasisError",
    "ComponentSet",
    "ConfigError",
    "DegenerateDensityError",
    "DsmConfig",
    "EmpiricalDiracPrior",
    "ExperimentConfig",
    "FormatError",
    "GmmPrior",
    "IsotropicGaussianPrior",
    "LogDensityUnavailableError",
    "MetricReport",
    "MixingOperator",
    "MixtureCase",
    "NoiseSchedule",
    "PLAIN_ASCENT",
    "RngStream",
    "SamplerConfig",
    "SamplerDivergedError",
    "ScoreNet",
    "ScoreNetPrior",
    "ScorePrior",
    "Signal",
    "Trace",
    "TrainReport",
    "TrainingDivergedError",
    "TuplePosterior",
    "TwoBasinBenchmark",
    "UnsupportedOperatorError",
    "UnsupportedPriorError",
    "UnsupportedSizeError",
    "average_baseline",
    "baseline_ascend",
    "basis_separate",
    "best_of_n",
    "channel_collapse",
    "dsm_loss_and_grad",
    "dsm_pointwise_loss",
    "emit_metrics",
    "empirical_prior",
    "empirical_tuple_distribution",
    "gaussian_score",
    "geometric_schedule",
    "gmm_noisy_log_density",
    "gmm_noisy_score",
    "grad_proportionality_experiment",
    "langevin_step",
    "likelihood_grad",
    "linear_sum",
    "load_config",
    "load_weights",
    "log_density_report",
    "make_mixture_set",
    "match_components",
    "mix",
    "mmd_rbf",
    "parse_config",
    "posterior_log_density",
    "psnr",
    "read_idx",
    "read_idx_images",
    "read_idx_labels",
    "read_pnm",
    "reconstruction_error",
    "run_experiment",
    "save_weights",
    "scorenet_forward",
    "signal_from_array",
    "snap_components",
    "snr_trace",
    "step_size",
    "summarize_separation",
    "toy_color_images",
    "toy_gmm_2d",
    "toy_images",
    "toy_line_images",
    "train_dsm",
    "tuple_posterior_oracle",
    "tv_distance",
    "two_basin_benchmark",
    "write_pnm",
    "write_trace_csv",
]
