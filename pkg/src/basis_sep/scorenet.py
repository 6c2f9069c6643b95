"""A small noise-conditioned score network trained by denoising score matching.

The network is a softplus MLP that maps a perturbed signal to an estimate of
the score of the noised data distribution.  Noise conditioning is explicit:
the level index enters as a one-hot block appended to the input, and each
level owns a learned output scale.  For input x at level l with noise scale
sigma_l, the forward map is

    net(x, l) = scale_l * MLP([x ; onehot(l)]).

Training minimizes the denoising objective: perturb a data point as
x_tilde = x + sigma_l * eps with eps ~ Normal(0, I); the noised-density score
at x_tilde has conditional expectation -eps / sigma_l, so the per-batch loss

    sigma_l^2 * mean ||net(x_tilde, l) + eps / sigma_l||^2 / 2

is minimized exactly by the true score of the data smoothed at sigma_l.  The
sigma^2 weighting keeps the loss magnitude comparable across levels (a zero
network scores d/2 at every level).

Gradients are exact reverse-mode accumulation through the declared
architecture, written out by hand in numpy; optimization is plain stochastic
gradient descent with a fixed learning rate.

Weights serialize to a little-endian binary format: magic ``BSN1``, then
uint32 header fields (input dimension, level count, hidden layer count,
hidden sizes), then raw float64 payload in declared layer order (each layer's
weight matrix row-major, then its bias; finally the per-level output scales).
"""

from __future__ import annotations

import copy
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import (
    FormatError,
    LogDensityUnavailableError,
    NoiseSchedule,
    Shape,
    Signal,
    TrainingDivergedError,
)
from .priors import ScorePrior

__all__ = [
    "ScoreNet",
    "ScoreNetGrads",
    "DsmConfig",
    "TrainReport",
    "ScoreNetPrior",
    "scorenet_forward",
    "dsm_pointwise_loss",
    "dsm_loss_and_grad",
    "train_dsm",
    "save_weights",
    "load_weights",
]

MAGIC = b"BSN1"
DEFAULT_HIDDEN = (128, 128)


def _softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + exp(z)), stable for large |z|.
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


class ScoreNet:
    """Noise-conditioned MLP score model.

    Attributes
    ----------
    d : int
        Signal dimension (inputs and outputs are length-d vectors).
    level_count : int
        Number of noise levels the one-hot conditioning distinguishes.
    hidden : tuple of int
        Hidden layer widths.
    layers : list of (W, b)
        Linear layers; ``W`` has shape (out, in) and is applied as ``a @ W.T + b``.
        Layer 0 consumes ``d + level_count`` inputs; the final layer emits ``d``.
    scales : ndarray of shape (level_count,)
        Learned per-level output scales.
    """

    def __init__(self, d, level_count, layers, scales, hidden):
        self.d = int(d)
        self.level_count = int(level_count)
        self.hidden = tuple(int(h) for h in hidden)
        self.layers = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64))
                       for W, b in layers]
        self.scales = np.asarray(scales, dtype=np.float64)
        self._validate()

    def _validate(self):
        if self.d < 1 or self.level_count < 1:
            raise ValueError("d and level_count must be positive")
        sizes = [self.d + self.level_count, *self.hidden, self.d]
        if len(self.layers) != len(sizes) - 1:
            raise ValueError("layer count does not match hidden sizes")
        for l, (W, b) in enumerate(self.layers):
            if W.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise ValueError(
                    f"layer {l} has shape {W.shape}/{b.shape}, "
                    f"expected {(sizes[l + 1], sizes[l])}/{(sizes[l + 1],)}"
                )
        if self.scales.shape != (self.level_count,):
            raise ValueError("scales must have one entry per level")

    @classmethod
    def initialize(cls, d, level_count, hidden=DEFAULT_HIDDEN, seed=0, scales=None):
        """He-scaled random hidden layers, zero final layer.

        The zero final layer makes the initial score field identically zero,
        so the first training loss sits at the d/2 baseline regardless of seed.
        ``scales`` sets the initial per-level output scales (default: all
        ones).  Passing ``1 / schedule.sigmas`` makes the raw trunk predict
        the standardized noise direction, which keeps its targets O(1) at
        every level and is the recommended starting point for training.
        """
        d = int(d)
        level_count = int(level_count)
        hidden = tuple(int(h) for h in hidden)
        if scales is None:
            scales = np.ones(level_count)
        else:
            scales = np.asarray(scales, dtype=float).copy()
            if scales.shape != (level_count,):
                raise ValueError(
                    f"scales must have shape ({level_count},), got {scales.shape}")
            if not np.all(np.isfinite(scales)) or np.any(scales <= 0):
                raise ValueError("initial scales must be positive and finite")
        rng = np.random.Generator(np.random.Philox(key=np.array(
            [int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5C02E7E7], dtype=np.uint64)))
        sizes = [d + level_count, *hidden, d]
        layers = []
        for l in range(len(sizes) - 1):
            fan_in = sizes[l]
            if l == len(sizes) - 2:
                W = np.zeros((sizes[l + 1], fan_in))
            else:
                W = rng.standard_normal((sizes[l + 1], fan_in)) * math.sqrt(2.0 / fan_in)
            layers.append((W, np.zeros(sizes[l + 1])))
        return cls(d, level_count, layers, scales, hidden)

    def copy(self) -> "ScoreNet":
        return ScoreNet(
            self.d,
            self.level_count,
            [(W.copy(), b.copy()) for W, b in self.layers],
            self.scales.copy(),
            self.hidden,
        )

    def _inputs(self, x: np.ndarray, level: int) -> np.ndarray:
        onehot = np.zeros((x.shape[0], self.level_count))
        onehot[:, level] = 1.0
        return np.concatenate([x, onehot], axis=1)

    def _forward_cached(self, x: np.ndarray, level: int):
        """Forward pass keeping pre-activations and activations for backprop."""
        u = self._inputs(x, level)
        acts = [u]
        zs = []
        a = u
        for W, b in self.layers[:-1]:
            z = a @ W.T + b
            zs.append(z)
            a = _softplus(z)
            acts.append(a)
        W, b = self.layers[-1]
        z_out = a @ W.T + b
        y = self.scales[level] * z_out
        return y, z_out, zs, acts

    def forward(self, x, level: int) -> np.ndarray:
        """Score estimates for a batch ``x`` of shape (batch, d) or a single point."""
        level = int(level)
        if not 0 <= level < self.level_count:
            raise ValueError(f"level {level} outside [0, {self.level_count})")
        if isinstance(x, Signal):
            x = x.data
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise ValueError(f"input must have trailing dimension {self.d}")
        y, _, _, _ = self._forward_cached(pts, level)
        return y[0] if single else y

    def backward(self, dy: np.ndarray, level: int, z_out, zs, acts) -> "ScoreNetGrads":
        """Reverse-mode accumulation of d(loss)/d(weights) given d(loss)/d(output)."""
        d_scales = np.zeros_like(self.scales)
        d_scales[level] = float(np.sum(dy * z_out))
        dz = dy * self.scales[level]
        d_layers: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        for l in range(len(self.layers) - 1, -1, -1):
            W, _ = self.layers[l]
            a_in = acts[l]
            d_layers[l] = (dz.T @ a_in, dz.sum(axis=0))
            if l > 0:
                da = dz @ W
                dz = da * expit(zs[l - 1])
        return ScoreNetGrads(d_layers, d_scales)


@dataclass
class ScoreNetGrads:
    """Gradient container mirroring :class:`ScoreNet` weights."""

    layers: list
    scales: np.ndarray

    def all_finite(self) -> bool:
        if not np.all(np.isfinite(self.scales)):
            return False
        return all(np.all(np.isfinite(W)) and np.all(np.isfinite(b))
                   for W, b in self.layers)


def scorenet_forward(net: ScoreNet, x, level: int) -> np.ndarray:
    """Evaluate the score network (module-level convenience wrapper)."""
    return net.forward(x, level)


def dsm_pointwise_loss(outputs: np.ndarray, eps: np.ndarray, sigma: float) -> float:
    """Denoising loss given network outputs and the noise that was injected.

    Equals ``sigma^2 * mean_batch ||outputs + eps/sigma||^2 / 2``; identically
    zero when the outputs match the conditional score -eps/sigma.
    """
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive for the denoising objective")
    resid = outputs + eps / sigma
    return float(0.5 * sigma * sigma * np.mean(np.sum(resid * resid, axis=-1)))


def _batch_matrix(batch, d: int) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        pts = np.asarray(batch, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
    else:
        rows = [s.data if isinstance(s, Signal) else np.asarray(s, dtype=np.float64)
                for s in batch]
        pts = np.stack(rows)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"batch must be (n, {d}), got {pts.shape}")
    if pts.shape[0] < 1:
        raise ValueError("batch must be non-empty")
    return pts


def dsm_loss_and_grad(net: ScoreNet, batch, level: int, sigma: float,
                      rng: np.random.Generator):
    """Denoising loss on one batch at one level, with exact weight gradients.

    Parameters
    ----------
    net : ScoreNet
    batch : (n, d) array or sequence of Signal
    level : int
        Conditioning level index.
    sigma : float
        Noise scale of that level.
    rng : numpy Generator
        Source of the perturbation noise (consumed sequentially).

    Returns
    -------
    (loss, grads) : (float, ScoreNetGrads)
    """
    level = int(level)
    if not 0 <= level < net.level_count:
        raise ValueError(f"level {level} outside [0, {net.level_count})")
    sigma = float(sigma)
    if sigma <= 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    pts = _batch_matrix(batch, net.d)
    n = pts.shape[0]
    eps = rng.standard_normal(pts.shape)
    noisy = pts + sigma * eps
    y, z_out, zs, acts = net._forward_cached(noisy, level)
    resid = y + eps / sigma
    loss = float(0.5 * sigma * sigma * np.mean(np.sum(resid * resid, axis=-1)))
    dy = (sigma * sigma / n) * resid
    grads = net.backward(dy, level, z_out, zs, acts)
    return loss, grads


@dataclass(frozen=True)
class DsmConfig:
    """Training hyperparameters for denoising score matching."""

    schedule: NoiseSchedule
    batch_size: int = 128
    learning_rate: float = 1e-3
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate <= 0 or not math.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be positive and finite")
        if int(self.epochs) < 0:
            raise ValueError("epochs must be non-negative")
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "epochs", int(self.epochs))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)


@dataclass
class TrainReport:
    """Per-epoch mean losses plus the first-batch reference loss."""

    epoch_losses: np.ndarray
    initial_loss: float
    steps: int


def train_dsm(net: ScoreNet, dataset, config: DsmConfig):
    """Train a copy of ``net`` with Adam on the denoising objective.

    Each batch draws a level uniformly at random, perturbs the batch at that
    level's sigma, and takes one Adam step (beta1=0.9, beta2=0.999) at the
    configured learning rate.  Training is deterministic given (seed, dataset
    order).  Raises :class:`TrainingDivergedError` as soon as any batch loss
    exceeds 10x the first batch's loss (or stops being finite).

    Returns
    -------
    (trained, report) : (ScoreNet, TrainReport)
        ``trained`` is a copy; the input network is never mutated.  Zero
        epochs return an identical copy and an empty loss curve.
    """
    data = _batch_matrix(dataset, net.d)
    if config.schedule.levels != net.level_count:
        raise ValueError(
            f"schedule has {config.schedule.levels} levels, "
            f"network expects {net.level_count}"
        )
    trained = net.copy()
    rng = np.random.Generator(np.random.Philox(key=np.array(
        [config.seed, 0xD5A11], dtype=np.uint64)))
    sigmas = config.schedule.sigmas
    n = data.shape[0]
    epoch_losses = []
    initial_loss = None
    steps = 0
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    params = [arr for W_b in trained.layers for arr in W_b] + [trained.scales]
    first_moment = [np.zeros_like(p) for p in params]
    second_moment = [np.zeros_like(p) for p in params]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            batch = data[order[start:start + config.batch_size]]
            level = int(rng.integers(0, net.level_count))
            loss, grads = dsm_loss_and_grad(trained, batch, level,
                                            float(sigmas[level]), rng)
            if initial_loss is None:
                initial_loss = loss
            limit = 10.0 * max(initial_loss, 1e-12)
            if not math.isfinite(loss) or loss > limit or not grads.all_finite():
                raise TrainingDivergedError(
                    f"batch loss {loss:.6g} exceeded 10x initial loss "
                    f"{initial_loss:.6g} after {steps} steps"
                )
            flat_grads = [arr for g in grads.layers for arr in g] + [grads.scales]
            steps += 1
            lr = config.learning_rate
            correction1 = 1.0 - beta1 ** steps
            correction2 = 1.0 - beta2 ** steps
            for p, g, m1, m2 in zip(params, flat_grads, first_moment, second_moment):
                m1 *= beta1
                m1 += (1.0 - beta1) * g
                m2 *= beta2
                m2 += (1.0 - beta2) * g * g
                p -= lr * (m1 / correction1) / (np.sqrt(m2 / correction2) + eps)
            batch_losses.append(loss)
        epoch_losses.append(float(np.mean(batch_losses)))
    report = TrainReport(
        epoch_losses=np.asarray(epoch_losses, dtype=np.float64),
        initial_loss=float(initial_loss) if initial_loss is not None else float("nan"),
        steps=steps,
    )
    return trained, report


def save_weights(net: ScoreNet, path):
    """Write network weights in the ``BSN1`` little-endian binary format."""
    header = bytearray()
    header += MAGIC
    header += struct.pack("<III", net.d, net.level_count, len(net.hidden))
    header += struct.pack(f"<{len(net.hidden)}I", *net.hidden) if net.hidden else b""
    payload = bytearray(header)
    for W, b in net.layers:
        payload += np.ascontiguousarray(W, dtype="<f8").tobytes()
        payload += np.ascontiguousarray(b, dtype="<f8").tobytes()
    payload += np.ascontiguousarray(net.scales, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(payload))


def load_weights(path) -> ScoreNet:
    """Read a ``BSN1`` weight file, validating structure and length."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}", offset=0)
    off = 4
    if len(raw) < off + 12:
        raise FormatError("truncated header", offset=len(raw))
    d, level_count, n_hidden = struct.unpack_from("<III", raw, off)
    off += 12
    if d < 1 or level_count < 1:
        raise FormatError(f"invalid dimensions d={d}, levels={level_count}", offset=4)
    if len(raw) < off + 4 * n_hidden:
        raise FormatError("truncated hidden-size list", offset=len(raw))
    hidden = struct.unpack_from(f"<{n_hidden}I", raw, off) if n_hidden else ()
    off += 4 * n_hidden
    sizes = [d + level_count, *hidden, d]
    layers = []
    for l in range(len(sizes) - 1):
        rows, cols = sizes[l + 1], sizes[l]
        need = 8 * rows * cols
        if len(raw) < off + need:
            raise FormatError(f"truncated weight matrix for layer {l}", offset=len(raw))
        W = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols)
        off += need
        need = 8 * rows
        if len(raw) < off + need:
            raise FormatError(f"truncated bias for layer {l}", offset=len(raw))
        b = np.frombuffer(raw, dtype="<f8", count=rows, offset=off)
        off += need
        layers.append((W.copy(), b.copy()))
    need = 8 * level_count
    if len(raw) < off + need:
        raise FormatError("truncated per-level scales", offset=len(raw))
    scales = np.frombuffer(raw, dtype="<f8", count=level_count, offset=off).copy()
    off += need
    if off != len(raw):
        raise FormatError(f"{len(raw) - off} trailing bytes after payload", offset=off)
    return ScoreNet(d, level_count, layers, scales, hidden)


class ScoreNetPrior(ScorePrior):
    """Adapter that lets a trained network stand in for an analytic prior.

    The network is defined only at its schedule's noise levels; ``score``
    maps sigma to the nearest level and rejects values that match none.
    No log-density is available (scores only), so consumers that need one
    (e.g. sample selection by density) must use an analytic prior.
    """

    has_log_density = False
    has_sampling = False

    def __init__(self, net: ScoreNet, schedule: NoiseSchedule, shape: Shape | None = None):
        if schedule.levels != net.level_count:
            raise ValueError(
                f"schedule has {schedule.levels} levels, network expects {net.level_count}"
            )
        self.net = net
        self.schedule = schedule
        self.shape = tuple(shape) if shape is not None else (net.d,)
        if int(np.prod(self.shape)) != net.d:
            raise ValueError(f"shape {self.shape} does not match network dimension {net.d}")

    def _level_of(self, sigma: float) -> int:
        sig = self.schedule.sigmas
        level = int(np.argmin(np.abs(sig - float(sigma))))
        if not np.isclose(sig[level], float(sigma), rtol=1e-6, atol=0.0):
            raise ValueError(
                f"sigma {sigma} matches no schedule level (nearest is {sig[level]})"
            )
        return level

    def score(self, x, sigma: float) -> np.ndarray:
        return self.net.forward(x, self._level_of(sigma))

    def log_density(self, x, sigma: float):
        raise LogDensityUnavailableError(
            "trained score networks expose scores only, not densities"
        )
