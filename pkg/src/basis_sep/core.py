"""Shared signal containers, noise schedules, step sizes, and seeded RNG streams.

Everything downstream (priors, the Langevin sampler, mixing tasks, metrics)
works on flat float64 vectors carried next to an explicit shape tuple.  Keeping
signals flat gives one code path for image separation and channel collapse
alike; shapes are checked at operation boundaries rather than threaded through
the numerics.

The noise schedule is a geometric ladder sigma_1 >= ... >= sigma_L > 0.  The
Langevin step size at level i is

    eta_i = delta * sigma_i^2 / sigma_L^2,

which keeps the per-step signal-to-noise ratio of the update roughly constant
across levels.  Randomness comes from counter-based Philox streams keyed by
(seed, chain, stream), so every chain and every level consumes an independent
substream: reruns are bit-identical and results for chain j never depend on
how many chains run or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BasisError",
    "DegenerateDensityError",
    "FormatError",
    "LogDensityUnavailableError",
    "SamplerDivergedError",
    "TrainingDivergedError",
    "UnsupportedOperatorError",
    "UnsupportedPriorError",
    "UnsupportedSizeError",
    "Shape",
    "Signal",
    "signal_from_array",
    "NoiseSchedule",
    "geometric_schedule",
    "step_size",
    "AnnealConfig",
    "RngStream",
    "INIT_STREAM",
    "LEVEL_STREAM_BASE",
]

Shape = tuple[int, ...]


class BasisError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDensityError(BasisError, ValueError):
    """A density was requested where total variance is zero (a point mass)."""


class LogDensityUnavailableError(BasisError, TypeError):
    """The prior exposes scores only; it has no tractable log-density."""


class UnsupportedPriorError(BasisError, TypeError):
    """The operation needs a prior capability this prior does not provide."""


class UnsupportedOperatorError(BasisError, ValueError):
    """The mixing operator does not support the requested operation."""


class UnsupportedSizeError(BasisError, ValueError):
    """The problem size exceeds what the exhaustive algorithm permits."""


class TrainingDivergedError(BasisError, RuntimeError):
    """Score-network training loss exceeded 10x its initial value."""


class SamplerDivergedError(BasisError, RuntimeError):
    """A sampler coordinate left the trusted numeric range.

    Attributes
    ----------
    level, step : int
        Schedule level and within-level step at which divergence was detected.
    """

    def __init__(self, level: int, step: int, detail: str = ""):
        self.level = int(level)
        self.step = int(step)
        msg = f"sampler diverged at level {self.level}, step {self.step}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class FormatError(BasisError, ValueError):
    """A binary or text input violated its documented format.

    Attributes
    ----------
    offset : int or None
        Byte offset of the violation when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


def _validate_shape(shape) -> Shape:
    shape = tuple(int(e) for e in shape)
    if len(shape) == 0:
        raise ValueError("shape must have at least one extent")
    if any(e < 1 for e in shape):
        raise ValueError(f"shape extents must be positive, got {shape}")
    return shape


@dataclass(frozen=True)
class Signal:
    """A flat float64 vector with an explicit shape.

    ``data`` always has length ``prod(shape)``; the shape records how the
    vector is to be interpreted (e.g. ``(1, 28, 28)`` for a grayscale image,
    ``(3, h, w)`` for a color image stored channel-major).  Instances are
    treated as immutable.
    """

    data: np.ndarray
    shape: Shape

    def __post_init__(self):
        shape = _validate_shape(self.shape)
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64).ravel())
        if data.size != int(np.prod(shape)):
            raise ValueError(
                f"data length {data.size} does not match shape {shape} "
                f"(expected {int(np.prod(shape))})"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("signal entries must be finite")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", shape)

    @property
    def size(self) -> int:
        return self.data.size

    def reshaped(self) -> np.ndarray:
        """Return a view of the data laid out according to ``shape``."""
        return self.data.reshape(self.shape)


def signal_from_array(values, shape: Shape | None = None) -> Signal:
    """Build a :class:`Signal` from any array, inferring shape when omitted."""
    arr = np.asarray(values, dtype=np.float64)
    if shape is None:
        shape = arr.shape if arr.ndim > 0 else (1,)
    return Signal(arr.ravel(), tuple(shape))


@dataclass(frozen=True)
class NoiseSchedule:
    """A ladder of noise scales, largest first.

    Entries must be positive and non-increasing.  Equal consecutive entries
    are permitted (a constant ladder is occasionally useful for controlled
    experiments); strictly increasing ladders are rejected.
    """

    sigmas: np.ndarray

    def __post_init__(self):
        sig = np.ascontiguousarray(np.asarray(self.sigmas, dtype=np.float64).ravel())
        if sig.size < 1:
            raise ValueError("schedule needs at least one level")
        if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
            raise ValueError("noise scales must be positive and finite")
        if np.any(np.diff(sig) > 0):
            raise ValueError("noise scales must be non-increasing")
        object.__setattr__(self, "sigmas", sig)

    @property
    def levels(self) -> int:
        return self.sigmas.size

    def __iter__(self):
        return iter(self.sigmas)


def geometric_schedule(sigma_first: float, sigma_last: float, levels: int) -> NoiseSchedule:
    """Geometric ladder from ``sigma_first`` down to ``sigma_last``.

    Parameters
    ----------
    sigma_first, sigma_last : float
        Endpoints, with ``sigma_first >= sigma_last > 0``.  Both endpoints are
        reproduced exactly; the ratio between consecutive entries is constant.
    levels : int
        Number of entries, at least 2.

    Returns
    -------
    NoiseSchedule
    """
    if not (math.isfinite(sigma_first) and math.isfinite(sigma_last)):
        raise ValueError("schedule endpoints must be finite")
    if sigma_last <= 0 or sigma_first < sigma_last:
        raise ValueError(
            f"need sigma_first >= sigma_last > 0, got ({sigma_first}, {sigma_last})"
        )
    levels = int(levels)
    if levels < 2:
        raise ValueError(f"need at least 2 levels, got {levels}")
    return NoiseSchedule(np.geomspace(sigma_first, sigma_last, levels))


def step_size(schedule: NoiseSchedule, level: int, delta: float) -> float:
    """Langevin step size ``delta * sigma_level^2 / sigma_last^2``.

    The returned value equals ``delta`` exactly at the final level.
    """
    if delta <= 0 or not math.isfinite(delta):
        raise ValueError(f"delta must be positive and finite, got {delta}")
    sig = schedule.sigmas
    if not (0 <= level < sig.size):
        raise ValueError(f"level {level} outside schedule of {sig.size} levels")
    return float(delta * sig[level] ** 2 / sig[-1] ** 2)


@dataclass(frozen=True)
class AnnealConfig:
    """Annealing parameters shared by the sampler and its baselines.

    ``gamma2`` is the variance of the soft mixture-constraint relaxation
    ``m ~ Normal(g(x), gamma2 * I)``.  ``None`` couples it to the schedule as
    ``gamma2 = sigma_i^2`` at level i (the default); a positive float holds it
    fixed across levels, which is what the conjugate-Gaussian oracle tests use.
    """

    delta: float = 2e-5
    steps_per_level: int = 100
    seed: int = 0
    gamma2: float | None = None

    def __post_init__(self):
        if self.delta <= 0 or not math.isfinite(self.delta):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")
        if int(self.steps_per_level) < 0:
            # 0 is legal: every runner then returns its initialization
            # unchanged with an empty trace.
            raise ValueError("steps_per_level must be non-negative")
        object.__setattr__(self, "steps_per_level", int(self.steps_per_level))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)
        if self.gamma2 is not None:
            g2 = float(self.gamma2)
            if g2 <= 0 or not math.isfinite(g2):
                raise ValueError(f"gamma2 must be positive and finite, got {g2}")
            object.__setattr__(self, "gamma2", g2)

    def gamma2_at(self, sigma: float) -> float:
        """Constraint-relaxation variance at noise scale ``sigma``."""
        return float(sigma) ** 2 if self.gamma2 is None else self.gamma2


INIT_STREAM = 0
LEVEL_STREAM_BASE = 1

_MASK64 = 0xFFFFFFFFFFFFFFFF
_MASK32 = 0xFFFFFFFF


@dataclass(frozen=True)
class RngStream:
    """Counter-based random streams keyed by (seed, chain, stream id).

    Each (chain, stream) pair owns an independent Philox stream, so draws are
    bit-identical across runs and independent of execution order: chain j at
    level i sees the same Gaussians whether it runs alone, in a pool of
    thousands, or interleaved with other levels.  Stream id 0
    (:data:`INIT_STREAM`) is reserved for state initialization; stream
    ``1 + level`` (:data:`LEVEL_STREAM_BASE` + level) feeds the Langevin noise
    of that level.  Within one substream, draws are consumed sequentially.
    """

    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)

    def substream(self, chain: int, stream: int) -> np.random.Generator:
        """Return the generator for ``(chain, stream)``, freshly positioned."""
        chain = int(chain)
        stream = int(stream)
        if chain < 0 or stream < 0:
            raise ValueError("chain and stream indices must be non-negative")
        if chain > _MASK32 or stream > _MASK32:
            raise ValueError("chain and stream indices must fit in 32 bits")
        key = np.array(
            [self.seed, ((chain & _MASK32) << 32) | (stream & _MASK32)],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def init_stream(self, chain: int) -> np.random.Generator:
        return self.substream(chain, INIT_STREAM)

    def level_stream(self, chain: int, level: int) -> np.random.Generator:
        return self.substream(chain, LEVEL_STREAM_BASE + int(level))
