"""Evaluation: PSNR, component matching, exact small-problem oracles, MMD.

Separation quality is scored against ground truth after an exhaustive
matching step, because mixture components are exchangeable: estimates are
permuted to minimize total squared error before any per-component metric is
computed (restricted to k <= 4, where checking all k! permutations is cheap).

Tuple-posterior oracle
----------------------
For a point-mass prior over a dataset {x_1 .. x_N} the relaxed separation
posterior restricted to tuples is available in closed form, which gives an
exact reference distribution for validating the sampler end to end.  Under
the generative story at noise scale sigma and relaxation variance gamma2,

    component i  =  x_{t_i} + sigma * eps_i        (smoothed point mass)
    mixture      =  sum_i alpha_i * component_i + gamma * eps_0,

all noise i.i.d. standard normal, the observed mixture given tuple
t = (t_1 .. t_k) is Gaussian with mean sum_i alpha_i x_{t_i} and isotropic
variance gamma2 + sigma^2 * sum_i alpha_i^2 (the alpha-weighted smoothing
noise folds into the observation noise).  With a uniform prior over ordered
tuples, Bayes gives

    P(t | m)  proportional to  exp(-||m - sum_i alpha_i x_{t_i}||^2
                                   / (2 * (gamma2 + sigma^2 * sum_i alpha_i^2))),

normalized by a max-shifted log-sum-exp over all N^k ordered tuples.
Sampler outputs are mapped into tuple space by snapping each component to its
nearest dataset point (ties resolved to the lowest index), and agreement is
measured in total variation over the shared tuple universe.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import Shape, Signal, UnsupportedSizeError
from .priors import ScorePrior, _dataset_matrix
from .sampler import ComponentSet

__all__ = [
    "psnr",
    "match_components",
    "reconstruction_error",
    "TuplePosterior",
    "tuple_posterior_oracle",
    "snap_components",
    "empirical_tuple_distribution",
    "tv_distance",
    "mmd_rbf",
    "grad_proportionality_experiment",
    "log_density_report",
    "MetricReport",
    "summarize_separation",
]

PSNR_CAP_DB = 100.0
MAX_MATCH_COMPONENTS = 4
MAX_ORACLE_TUPLES = 10**6


def _flat(x) -> np.ndarray:
    if isinstance(x, Signal):
        return x.data
    return np.asarray(x, dtype=np.float64).ravel()


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 100 for exact matches."""
    peak = float(peak)
    if peak <= 0 or not math.isfinite(peak):
        raise ValueError(f"peak must be positive and finite, got {peak}")
    av, bv = _flat(a), _flat(b)
    if av.shape != bv.shape:
        raise ValueError(f"signals disagree in size: {av.size} vs {bv.size}")
    mse = float(np.mean((av - bv) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def match_components(estimate: ComponentSet, truth: ComponentSet) -> tuple[int, ...]:
    """Permutation of estimate rows minimizing total squared error to truth.

    Returns p with estimate.components[p[i]] assigned to truth component i.
    Exhaustive over k! permutations; rejects k > 4.  Ties keep the
    lexicographically first permutation.
    """
    if estimate.shape != truth.shape or estimate.k != truth.k:
        raise ValueError("estimate and truth must agree in k and shape")
    k = truth.k
    if k > MAX_MATCH_COMPONENTS:
        raise UnsupportedSizeError(
            f"exhaustive matching supports k <= {MAX_MATCH_COMPONENTS}, got {k}"
        )
    # cost[i, j] = squared error of assigning estimate j to truth i
    diff = truth.components[:, None, :] - estimate.components[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(k)):
        total = float(sum(cost[i, perm[i]] for i in range(k)))
        if total < best_cost:
            best, best_cost = perm, total
    return best


def reconstruction_error(m: Signal, components: ComponentSet, op) -> tuple[float, float]:
    """(max absolute, mean squared) elementwise error of m - g(components)."""
    if m.shape != tuple(op.mixture_shape):
        raise ValueError(f"mixture shape {m.shape} != operator shape {op.mixture_shape}")
    if components.shape != tuple(op.component_shape) or components.k != op.k:
        raise ValueError("components do not match the operator")
    residual = m.data - op.apply(components.components)
    return float(np.max(np.abs(residual))), float(np.mean(residual**2))


@dataclass(frozen=True)
class TuplePosterior:
    """A distribution over ordered index tuples from a shared enumeration.

    ``tuples`` is an (M, k) int matrix listing the universe in a fixed order;
    ``probs`` holds the matching probabilities (non-negative, summing to 1).
    """

    tuples: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.tuples, dtype=np.int64))
        p = np.ascontiguousarray(np.asarray(self.probs, dtype=np.float64))
        if t.ndim != 2 or p.shape != (t.shape[0],):
            raise ValueError("tuples must be (M, k) with probs of length M")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, expected 1")
        object.__setattr__(self, "tuples", t)
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return self.tuples.shape[1]


def _enumerate_tuples(n: int, k: int) -> np.ndarray:
    """All n^k ordered index tuples in row-major (odometer) order."""
    grids = np.meshgrid(*([np.arange(n)] * k), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def tuple_posterior_oracle(dataset, m: Signal, alpha, gamma2: float,
                           sigma2: float) -> TuplePosterior:
    """Exact posterior over ordered dataset tuples explaining the mixture.

    See the module docstring for the derivation.  ``sigma2`` is the squared
    smoothing scale of the point-mass prior (typically the final schedule
    level), ``gamma2`` the constraint-relaxation variance at that level.
    Rejects universes larger than 10^6 tuples.
    """
    pts, _ = _dataset_matrix(dataset, None)
    a = np.asarray(alpha, dtype=np.float64).ravel()
    k = a.size
    if k < 1:
        raise ValueError("need at least one mixing coefficient")
    gamma2 = float(gamma2)
    sigma2 = float(sigma2)
    if gamma2 <= 0 or sigma2 < 0:
        raise ValueError("need gamma2 > 0 and sigma2 >= 0")
    n = pts.shape[0]
    if pts.shape[1] != m.size:
        raise ValueError(f"dataset dimension {pts.shape[1]} != mixture size {m.size}")
    if n**k > MAX_ORACLE_TUPLES:
        raise UnsupportedSizeError(
            f"{n}^{k} tuples exceed the exhaustive limit of {MAX_ORACLE_TUPLES}"
        )
    tuples = _enumerate_tuples(n, k)
    variance = gamma2 + sigma2 * float(np.sum(a * a))
    logits = np.empty(tuples.shape[0])
    chunk = max(1, 2**22 // max(1, pts.shape[1]))
    for start in range(0, tuples.shape[0], chunk):
        idx = tuples[start:start + chunk]
        mean = np.einsum("i,cid->cd", a, pts[idx])
        diff = mean - m.data
        logits[start:start + chunk] = -np.sum(diff * diff, axis=1) / (2.0 * variance)
    probs = np.exp(logits - logsumexp(logits))
    probs /= probs.sum()
    return TuplePosterior(tuples, probs)


def snap_components(components: ComponentSet, dataset) -> tuple[int, ...]:
    """Nearest dataset index for each component (Euclidean, ties to lowest)."""
    pts, _ = _dataset_matrix(dataset, None)
    if pts.shape[1] != components.dim:
        raise ValueError("dataset and components disagree in dimension")
    sq = (
        np.sum(components.components**2, axis=1)[:, None]
        - 2.0 * components.components @ pts.T
        + np.sum(pts**2, axis=1)
    )
    return tuple(int(i) for i in np.argmin(sq, axis=1))


def empirical_tuple_distribution(snapped, n: int, k: int) -> TuplePosterior:
    """Empirical frequencies of snapped tuples over the full n^k universe."""
    snapped = list(snapped)
    if not snapped:
        raise ValueError("need at least one snapped tuple")
    tuples = _enumerate_tuples(n, k)
    counts = np.zeros(tuples.shape[0])
    powers = n ** np.arange(k - 1, -1, -1)
    for t in snapped:
        t = tuple(int(v) for v in t)
        if len(t) != k or any(v < 0 or v >= n for v in t):
            raise ValueError(f"tuple {t} outside universe ({n}, k={k})")
        counts[int(np.dot(t, powers))] += 1.0
    return TuplePosterior(tuples, counts / counts.sum())


def tv_distance(p: TuplePosterior, q: TuplePosterior) -> float:
    """Total variation distance between distributions on the same universe."""
    if p.tuples.shape != q.tuples.shape or not np.array_equal(p.tuples, q.tuples):
        raise ValueError("distributions live on different tuple universes")
    return 0.5 * float(np.sum(np.abs(p.probs - q.probs)))


def mmd_rbf(xs, ys, bandwidth: float | None = None) -> float:
    """Unbiased squared maximum mean discrepancy with a Gaussian kernel.

    ``bandwidth=None`` applies the median heuristic: the median pairwise
    Euclidean distance of the pooled sample.  The unbiased U-statistic can be
    slightly negative for close distributions.
    """
    x = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    y = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise ValueError("need at least two samples on each side")
    if x.shape[1] != y.shape[1]:
        raise ValueError("samples disagree in dimension")

    def sq_dists(a, b):
        return np.maximum(
            np.sum(a * a, axis=1)[:, None] - 2.0 * a @ b.T + np.sum(b * b, axis=1),
            0.0,
        )

    dxx, dyy, dxy = sq_dists(x, x), sq_dists(y, y), sq_dists(x, y)
    if bandwidth is None:
        pooled = np.concatenate([
            dxx[np.triu_indices_from(dxx, k=1)],
            dyy[np.triu_indices_from(dyy, k=1)],
            dxy.ravel(),
        ])
        bandwidth = float(np.sqrt(np.median(pooled)))
        if bandwidth == 0.0:
            bandwidth = 1.0
    bandwidth = float(bandwidth)
    if bandwidth <= 0 or not math.isfinite(bandwidth):
        raise ValueError(f"bandwidth must be positive and finite, got {bandwidth}")
    gamma = 1.0 / (2.0 * bandwidth * bandwidth)
    n, m = x.shape[0], y.shape[0]
    kxx = np.exp(-gamma * dxx)
    kyy = np.exp(-gamma * dyy)
    kxy = np.exp(-gamma * dxy)
    sum_xx = float(kxx.sum() - np.trace(kxx))
    sum_yy = float(kyy.sum() - np.trace(kyy))
    return (
        sum_xx / (n * (n - 1))
        + sum_yy / (m * (m - 1))
        - 2.0 * float(kxy.mean())
    )


def grad_proportionality_experiment(prior: ScorePrior, schedule, samples_per_level: int,
                                    rng: np.random.Generator, dataset=None) -> np.ndarray:
    """Per-level sigma * RMS score norm under samples from the noised prior.

    For each level sigma_i, draws ``samples_per_level`` points x ~ p_sigma_i
    (from the prior's sampler, or by perturbing rows of ``dataset`` when the
    prior cannot sample) and reports sigma_i * sqrt(mean ||score(x)||^2).
    A score field behaving like a smoothed point mass keeps this value near
    sqrt(dim) until sigma drops below the scale of the prior's own spread,
    where the proportionality breaks down and the value falls.
    """
    samples_per_level = int(samples_per_level)
    if samples_per_level < 1:
        raise ValueError("samples_per_level must be at least 1")
    data = None
    if dataset is not None:
        data, _ = _dataset_matrix(dataset, None)
        if data.shape[1] != prior.dim:
            raise ValueError("dataset dimension does not match the prior")
    elif not prior.has_sampling:
        raise ValueError("prior cannot sample; provide a dataset to perturb")
    out = np.empty(schedule.levels)
    for i, sigma in enumerate(schedule.sigmas):
        sigma = float(sigma)
        if data is not None:
            rows = rng.integers(0, data.shape[0], size=samples_per_level)
            xs = data[rows] + sigma * rng.standard_normal((samples_per_level, prior.dim))
        else:
            xs = prior.sample(sigma, samples_per_level, rng)
        scores = prior.score(xs, sigma)
        out[i] = sigma * math.sqrt(float(np.mean(np.sum(scores * scores, axis=1))))
    return out


def log_density_report(prior: ScorePrior, outputs, test_set, sigma_last: float):
    """Mean log-density of sampler outputs vs held-out data at sigma_last.

    ``outputs`` is a sequence of ComponentSets (all their components pool into
    one sample); ``test_set`` is a sequence of Signals or an (N, dim) array.
    Comparable means indicate the sampler lands on states the prior considers
    as typical as real data.
    """
    rows = [cs.components for cs in outputs]
    if not rows:
        raise ValueError("outputs must be non-empty")
    out_pts = np.concatenate(rows, axis=0)
    test_pts, _ = _dataset_matrix(test_set, None)
    mean_out = float(np.mean(prior.log_density(out_pts, float(sigma_last))))
    mean_test = float(np.mean(prior.log_density(test_pts, float(sigma_last))))
    return mean_out, mean_test


@dataclass
class MetricReport:
    """Aggregated separation metrics for a batch of cases.

    ``per_case_psnr`` holds each case's mean matched-component PSNR; the
    histogram is over those per-case values, so its counts sum to
    ``case_count``.  ``psnr_per_component_mean`` averages matched PSNR over
    every component of every case; ``psnr_per_pair_mean`` averages each case's
    joint PSNR (one mean-squared error across the whole component stack).
    Optional fields are None when the corresponding input was not supplied.
    """

    case_count: int
    psnr_per_component_mean: float
    psnr_per_pair_mean: float
    per_case_psnr: np.ndarray
    psnr_bin_edges: np.ndarray
    psnr_bin_counts: np.ndarray
    recon_max_abs: np.ndarray
    recon_mean_sq: np.ndarray
    oracle_tv: float | None = None
    mmd: float | None = None
    mmd_average: float | None = None
    log_density_outputs: float | None = None
    log_density_test: float | None = None


def summarize_separation(cases, estimates, op, histogram_bins: int = 20,
                         oracle_tv: float | None = None, mmd: float | None = None,
                         mmd_average: float | None = None,
                         log_density_outputs: float | None = None,
                         log_density_test: float | None = None) -> MetricReport:
    """Assemble a :class:`MetricReport` from cases and matched estimates.

    An empty case list yields a zero-count report (means 0, empty arrays),
    which still serializes to valid JSON.
    """
    cases = list(cases)
    estimates = list(estimates)
    if len(cases) != len(estimates):
        raise ValueError("need equally many cases and estimates")
    if not cases:
        empty = np.empty(0)
        return MetricReport(
            case_count=0,
            psnr_per_component_mean=0.0,
            psnr_per_pair_mean=0.0,
            per_case_psnr=empty,
            psnr_bin_edges=empty,
            psnr_bin_counts=np.empty(0, dtype=int),
            recon_max_abs=empty,
            recon_mean_sq=empty,
            oracle_tv=oracle_tv,
            mmd=mmd,
            mmd_average=mmd_average,
            log_density_outputs=log_density_outputs,
            log_density_test=log_density_test,
        )
    per_component: list[float] = []
    per_case = np.empty(len(cases))
    per_pair = np.empty(len(cases))
    recon_max = np.empty(len(cases))
    recon_sq = np.empty(len(cases))
    for c, (case, est) in enumerate(zip(cases, estimates)):
        perm = match_components(est, case.ground_truth)
        matched = est.components[list(perm)]
        truth = case.ground_truth.components
        vals = [psnr(matched[i], truth[i]) for i in range(truth.shape[0])]
        per_component.extend(vals)
        per_case[c] = float(np.mean(vals))
        per_pair[c] = psnr(matched.ravel(), truth.ravel())
        recon_max[c], recon_sq[c] = reconstruction_error(
            case.mixture, est, op
        )
    edges = np.histogram_bin_edges(per_case, bins=int(histogram_bins))
    counts, _ = np.histogram(per_case, bins=edges)
    return MetricReport(
        case_count=len(cases),
        psnr_per_component_mean=float(np.mean(per_component)),
        psnr_per_pair_mean=float(np.mean(per_pair)),
        per_case_psnr=per_case,
        psnr_bin_edges=edges,
        psnr_bin_counts=counts,
        recon_max_abs=recon_max,
        recon_mean_sq=recon_sq,
        oracle_tv=oracle_tv,
        mmd=mmd,
        mmd_average=mmd_average,
        log_density_outputs=log_density_outputs,
        log_density_test=log_density_test,
    )
