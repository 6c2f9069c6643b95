"""Mixing operators and mixture-case construction for separation experiments.

A mixture is a known linear reduction of unknown components.  Two operators
are provided:

- ``linear_sum``: m = sum_i alpha_i x_i over k equally-shaped components.
  The library convention uses alpha_i = 1/k so mixtures of [0, 1] signals
  stay in [0, 1]; any positive coefficients are accepted.
- ``channel_collapse``: a color image (3, h, w) collapses to its gray channel
  mean (1, h, w) with fixed coefficients 1/3.  This is a single-component
  operator: the "components" of the gray observation are the three channel
  planes of one jointly-modeled color image, so separation under it runs with
  k = 1 and a prior over the full color signal.

The trivial reference method ``average_baseline`` explains an equal-weight
mixture by handing every component a copy of the scaled mixture: with
alpha_i = 1/k each component is m itself, and the mixture is reconstructed
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Shape, Signal, UnsupportedOperatorError
from .sampler import ComponentSet

__all__ = [
    "MixingOperator",
    "linear_sum",
    "channel_collapse",
    "mix",
    "average_baseline",
    "MixtureCase",
    "make_mixture_set",
]

LINEAR_SUM = "linear-sum"
CHANNEL_COLLAPSE = "channel-collapse"


@dataclass(frozen=True)
class MixingOperator:
    """A linear map from a component set to a mixture signal.

    Use the :func:`linear_sum` / :func:`channel_collapse` constructors; the
    raw constructor does not validate cross-field consistency.
    """

    kind: str
    k: int
    alpha: np.ndarray
    component_shape: Shape
    mixture_shape: Shape

    def apply(self, components: np.ndarray) -> np.ndarray:
        """Map a (k, dim) component matrix to the flat mixture vector."""
        if self.kind == LINEAR_SUM:
            return self.alpha @ components
        c, h, w = self.component_shape
        return components.reshape(c, h * w).mean(axis=0)

    def adjoint(self, residual: np.ndarray) -> np.ndarray:
        """Apply the transpose map, returning a (k, dim) component matrix."""
        if self.kind == LINEAR_SUM:
            return np.outer(self.alpha, residual)
        c = self.component_shape[0]
        return np.tile(residual / c, c)[None, :]

    def sum_alpha_sq(self) -> float:
        """Squared Euclidean norm of the per-pixel mixing coefficients."""
        if self.kind == LINEAR_SUM:
            return float(np.sum(self.alpha**2))
        c = self.component_shape[0]
        return float(c * (1.0 / c) ** 2)


def linear_sum(alpha, shape: Shape) -> MixingOperator:
    """Weighted-sum operator m = sum_i alpha_i x_i.

    Parameters
    ----------
    alpha : sequence of positive floats, one per component (k = len(alpha)).
    shape : shape shared by every component and by the mixture.
    """
    a = np.ascontiguousarray(np.asarray(alpha, dtype=np.float64).ravel())
    if a.size < 1:
        raise ValueError("need at least one mixing coefficient")
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("mixing coefficients must be positive and finite")
    shape = tuple(int(e) for e in shape)
    return MixingOperator(LINEAR_SUM, a.size, a, shape, shape)


def channel_collapse(component_shape: Shape) -> MixingOperator:
    """Channel-mean operator (3, h, w) -> (1, h, w) with coefficients 1/3."""
    shape = tuple(int(e) for e in component_shape)
    if len(shape) != 3 or shape[0] != 3:
        raise UnsupportedOperatorError(
            f"channel collapse needs a (3, h, w) component shape, got {shape}"
        )
    alpha = np.full(1, 1.0)  # one joint component; per-channel weight is fixed at 1/3
    return MixingOperator(CHANNEL_COLLAPSE, 1, alpha, shape, (1, shape[1], shape[2]))


def mix(components: ComponentSet, op: MixingOperator) -> Signal:
    """Apply the operator to a component set, shape-checked."""
    if components.shape != op.component_shape:
        raise ValueError(
            f"components have shape {components.shape}, operator expects "
            f"{op.component_shape}"
        )
    if components.k != op.k:
        raise ValueError(f"component set has k={components.k}, operator expects {op.k}")
    return Signal(op.apply(components.components), op.mixture_shape)


def average_baseline(m: Signal, op: MixingOperator) -> ComponentSet:
    """Explain an equal-weight mixture by scaled copies of itself.

    Each component is m / (k * alpha); with the 1/k convention this is m
    itself.  Restricted to equal-coefficient weighted sums: anything else has
    no single scaled copy that satisfies the mixture constraint.
    """
    if op.kind != LINEAR_SUM:
        raise UnsupportedOperatorError(
            "the average baseline is defined only for weighted-sum mixing"
        )
    if not np.allclose(op.alpha, op.alpha[0], rtol=1e-12, atol=0.0):
        raise UnsupportedOperatorError(
            "the average baseline needs equal mixing coefficients, got "
            f"{op.alpha.tolist()}"
        )
    if m.shape != op.mixture_shape:
        raise ValueError(f"mixture shape {m.shape} != operator shape {op.mixture_shape}")
    comp = m.data / (op.k * op.alpha[0])
    return ComponentSet(np.tile(comp, (op.k, 1)), op.component_shape)


@dataclass(frozen=True)
class MixtureCase:
    """One separation problem: the observed mixture and its ground truth."""

    mixture: Signal
    ground_truth: ComponentSet
    pairing: str
    source_indices: tuple[int, ...]


def _dataset_signals(dataset) -> tuple[list[np.ndarray], list, Shape]:
    """Split a dataset into flat vectors, labels (or Nones), and the shape."""
    vectors, labels = [], []
    for entry in dataset:
        if isinstance(entry, tuple):
            sig, label = entry
        else:
            sig, label = entry, None
        if not isinstance(sig, Signal):
            raise ValueError("dataset entries must be Signal or (Signal, label)")
        vectors.append(sig.data)
        labels.append(label)
    if not vectors:
        raise ValueError("dataset must be non-empty")
    shapes = {tuple(entry[0].shape) if isinstance(entry, tuple) else entry.shape
              for entry in dataset}
    if len(shapes) != 1:
        raise ValueError(f"dataset signals disagree in shape: {sorted(shapes)}")
    return vectors, labels, next(iter(shapes))


def make_mixture_set(dataset, count: int, op: MixingOperator, seed: int = 0,
                     pairing: str = "class-agnostic", groups=None) -> list[MixtureCase]:
    """Draw ``count`` seeded mixture cases from a dataset.

    Parameters
    ----------
    dataset : sequence of Signal or (Signal, label)
    count : int
        Number of cases; selection is uniform with replacement across cases
        and without replacement within a case.
    op : MixingOperator
        Must be a weighted sum over k components.
    seed : int
        Makes the drawn cases deterministic.
    pairing : "class-agnostic" or "class-split"
        Class-agnostic ignores labels.  Class-split draws component i from
        ``groups[i]``; ``groups`` must then be a list of k disjoint label
        collections that cover every label present in the dataset.
    """
    if op.kind != LINEAR_SUM:
        raise UnsupportedOperatorError("mixture sets are drawn for weighted-sum mixing")
    if int(count) < 1:
        raise ValueError("count must be at least 1")
    vectors, labels, shape = _dataset_signals(dataset)
    if shape != op.component_shape:
        raise ValueError(f"dataset shape {shape} != operator shape {op.component_shape}")
    k = op.k
    n = len(vectors)
    rng = np.random.default_rng(int(seed))

    if pairing == "class-agnostic":
        if n < k:
            raise ValueError(f"need at least k={k} dataset entries, have {n}")
        pools = None
    elif pairing == "class-split":
        if groups is None or len(groups) != k:
            raise ValueError(f"class-split pairing needs exactly k={k} label groups")
        group_sets = [frozenset(g) for g in groups]
        for i, a in enumerate(group_sets):
            if not a:
                raise ValueError(f"label group {i} is empty")
            for b in group_sets[i + 1:]:
                if a & b:
                    raise ValueError(f"label groups overlap on {sorted(a & b)}")
        present = {lab for lab in labels if lab is not None}
        covered = frozenset().union(*group_sets)
        if any(lab is None for lab in labels):
            raise ValueError("class-split pairing needs a labeled dataset")
        if present - covered:
            raise ValueError(
                f"labels {sorted(present - covered)} belong to no group"
            )
        pools = [np.array([i for i, lab in enumerate(labels) if lab in g], dtype=int)
                 for g in group_sets]
        for i, pool in enumerate(pools):
            if pool.size == 0:
                raise ValueError(f"label group {i} matches no dataset entry")
    else:
        raise ValueError(f"unknown pairing {pairing!r}")

    data = np.stack(vectors)
    cases = []
    for _ in range(int(count)):
        if pools is None:
            idx = rng.choice(n, size=k, replace=False)
        else:
            idx = np.array([pool[rng.integers(pool.size)] for pool in pools])
        comps = ComponentSet(data[idx], shape)
        cases.append(MixtureCase(
            mixture=mix(comps, op),
            ground_truth=comps,
            pairing=pairing,
            source_indices=tuple(int(i) for i in idx),
        ))
    return cases
