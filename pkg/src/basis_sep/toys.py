"""Small deterministic datasets and benchmarks for desk-scale experiments.

Everything here is fixed by construction (seeded or fully deterministic) so
tests and experiment runs are reproducible down to the byte.  Three families:

* random well-separated 8x8 images (`toy_images`, `toy_color_images`) --
  generic separation fodder whose minimum pairwise distance is far above
  every annealing noise floor, so nearest-dataset-point snapping is
  unambiguous;
* a brightness-ramp line of images with exact mixture collisions
  (`toy_line_images`) -- adjacent images differ by a fixed step along one
  direction, so every pair (i, j) with the same index sum produces the same
  equal-weight mixture.  The resulting tuple posterior is uniform over the
  colliding pairs at every noise level, which makes it the reference
  instance for validating sampled tuple frequencies against the exact
  discrete posterior;
* fixed low-dimensional mixture models (`toy_gmm_2d`,
  `two_basin_benchmark`) used to score trained networks against analytic
  scores and to compare the stochastic sampler with its deterministic
  ablations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Signal
from .priors import GmmPrior
from .sampler import ComponentSet
from .tasks import MixingOperator, linear_sum

__all__ = [
    "toy_images",
    "toy_color_images",
    "toy_line_images",
    "toy_gmm_2d",
    "TwoBasinBenchmark",
    "two_basin_benchmark",
]


def toy_images(count: int = 10, shape=(1, 8, 8), seed: int = 42,
               low: float = 0.05, high: float = 0.95) -> list[Signal]:
    """Uniform random images in [low, high], deterministic given the seed.

    Independent uniform pixels keep the points far apart: for the default
    10 images of 64 pixels the minimum pairwise distance is about 2.5, so
    the images act as unambiguous, well-separated point masses for the
    empirical prior.
    """
    count = int(count)
    if count < 1:
        raise ValueError("count must be at least 1")
    if not (0.0 <= low < high <= 1.0):
        raise ValueError(f"need 0 <= low < high <= 1, got [{low}, {high}]")
    dim = int(np.prod(shape))
    rng = np.random.default_rng(int(seed))
    rows = rng.uniform(low, high, size=(count, dim))
    return [Signal(row, tuple(shape)) for row in rows]


def toy_color_images(count: int = 10, shape=(3, 8, 8), seed: int = 7) -> list[Signal]:
    """Uniform random three-channel images; see :func:`toy_images`."""
    if len(shape) != 3 or shape[0] != 3:
        raise ValueError(f"color images need shape (3, h, w), got {shape}")
    return toy_images(count, shape, seed)


def toy_line_images(count: int = 10, shape=(1, 8, 8), spacing: float = 0.15) -> list[Signal]:
    """Images along a brightness ramp with exact equal-mixture collisions.

    Image i equals ``center + (i - (count-1)/2) * spacing * u`` where u is a
    unit-norm diagonal ramp pattern.  Consequences used by tests:

    * adjacent images are exactly ``spacing`` apart, so snapping stays
      unambiguous for any sampler noise well below ``spacing / 2``;
    * the equal mixture of images (i, j) depends only on i + j, so all
      pairs with the same index sum collide onto one mixture and the exact
      tuple posterior is uniform over them at every smoothing level.
    """
    count = int(count)
    if count < 2:
        raise ValueError("count must be at least 2")
    spacing = float(spacing)
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if len(shape) != 3:
        raise ValueError(f"expected (channels, h, w), got {shape}")
    channels, h, w = (int(s) for s in shape)
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    ramp = np.tile((ii + jj + 1).astype(float).ravel(), channels)
    direction = ramp / np.linalg.norm(ramp)
    offsets = (np.arange(count) - (count - 1) / 2.0) * spacing
    rows = 0.5 + offsets[:, None] * direction[None, :]
    if rows.min() < 0.0 or rows.max() > 1.0:
        raise ValueError(
            f"count {count} at spacing {spacing} leaves the unit range; "
            "reduce either one"
        )
    return [Signal(row, (channels, h, w)) for row in rows]


def toy_gmm_2d() -> GmmPrior:
    """Fixed three-cluster planar mixture for score-network training runs.

    Cluster standard deviations (0.07, 0.05, 0.06) sit two decades above the
    finest default noise level, so the analytic score stays smooth and
    learnable at every level, yet well below the cluster separations, so the
    density is strongly multimodal.
    """
    means = np.array([[-0.6, -0.2], [0.1, 0.55], [0.7, -0.45]])
    weights = np.array([0.4, 0.35, 0.25])
    variances = np.array([0.005, 0.0025, 0.0036])
    return GmmPrior(weights, means, variances, (2,))


@dataclass(frozen=True)
class TwoBasinBenchmark:
    """Fixed two-component scalar separation with one decoy basin.

    The component prior puts heavy point masses at 0 and 1 and a light one
    at 0.55.  With the equal mixture observed at 0.5, the exactly-solving
    pairs {(0, 1), (1, 0)} carry almost all posterior mass (the heavy outer
    basins), while (0.55, 0.55) nearly solves it but is roughly 12 nats
    lighter (the decoy).  Initialization is drawn from a narrow square
    around the origin so that plain ascent is pinned in the (0, 0) trap,
    the deterministic annealed flow follows the symmetric ridge into the
    decoy, and only the noisy sampler reaches the outer basins.
    """

    prior: GmmPrior
    operator: MixingOperator
    mixture: Signal
    ascent_lambda: float
    init_low: float
    init_high: float

    def initial_state(self, seed: int) -> ComponentSet:
        """Per-seed uniform draw from the benchmark's initialization square."""
        rng = np.random.default_rng(1000 + int(seed))
        draw = rng.uniform(self.init_low, self.init_high, size=(self.operator.k, 1))
        return ComponentSet(draw, (1,))


def two_basin_benchmark() -> TwoBasinBenchmark:
    """The fixed benchmark instance; see :class:`TwoBasinBenchmark`."""
    prior = GmmPrior(
        np.array([0.45, 0.10, 0.45]),
        np.array([[0.0], [0.55], [1.0]]),
        np.zeros(3),
        (1,),
    )
    return TwoBasinBenchmark(
        prior=prior,
        operator=linear_sum([0.5, 0.5], (1,)),
        mixture=Signal(np.array([0.5]), (1,)),
        ascent_lambda=50.0,
        init_low=-0.25,
        init_high=0.25,
    )
