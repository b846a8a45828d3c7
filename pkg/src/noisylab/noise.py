"""Label-noise transition matrices and seeded corruption of label arrays.

A noise model is a K x K row-stochastic matrix T with T[y][k] the
probability that a true label y is recorded as k. Symmetric (uniform) noise
spreads a rate eta evenly over the other classes; pair-flip noise sends each
listed class to one designated confusable class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream

# standard digit confusions: 2->7, 3->8, 5<->6, 7->1
MNIST_FLIP_PAIRS = ((2, 7), (3, 8), (5, 6), (6, 5), (7, 1))


@dataclass(frozen=True)
class NoiseModel:
    """Row-stochastic label transition matrix with its nominal noise rate."""

    num_classes: int
    transition: np.ndarray = field(repr=False)
    eta: float

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=np.float64)
        if t.shape != (self.num_classes, self.num_classes):
            raise ValueError("transition matrix shape does not match class count")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("transition entries must lie in [0, 1]")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        object.__setattr__(self, "transition", t)


@dataclass(frozen=True)
class CorruptionRecord:
    """Outcome of one corruption pass over a label array."""

    noisy_labels: np.ndarray = field(repr=False)
    clean_mask: np.ndarray = field(repr=False)
    realized_rate: float


def symmetric_matrix(num_classes: int, eta: float) -> NoiseModel:
    """Uniform noise: keep the label with probability 1 - eta, otherwise
    flip to one of the other classes with probability eta / (K - 1) each."""
    if num_classes < 2:
        raise ValueError("need at least two classes")
    if not (0 <= eta <= 1):
        raise ValueError("eta must lie in [0, 1]")
    t = np.full((num_classes, num_classes), eta / (num_classes - 1))
    np.fill_diagonal(t, 1.0 - eta)
    return NoiseModel(num_classes, t, eta)


def pairflip_matrix(num_classes: int, eta: float, pairs) -> NoiseModel:
    """Class-dependent noise: each (src, dst) pair flips src to dst with
    probability eta; unlisted classes keep their labels. A bidirectional
    confusion a<->b is written as the two pairs (a, b) and (b, a)."""
    if not (0 <= eta <= 1):
        raise ValueError("eta must lie in [0, 1]")
    t = np.eye(num_classes)
    seen = set()
    for src, dst in pairs:
        if not (0 <= src < num_classes and 0 <= dst < num_classes):
            raise ValueError("flip pair class out of range")
        if src == dst:
            raise ValueError("flip pair must name two distinct classes")
        if src in seen:
            raise ValueError(f"class {src} appears as flip source twice")
        seen.add(src)
        t[src, src] = 1.0 - eta
        t[src, dst] = eta
    return NoiseModel(num_classes, t, eta)


def sample_flip_pairs(num_classes: int, rng: RngStream) -> tuple[tuple[int, int], ...]:
    """Seeded bidirectional pairing of classes for generalized pair-flip
    noise: a random disjoint matching, one a<->b confusion per pair (the odd
    class out, if any, stays clean)."""
    order = rng.generator().permutation(num_classes)
    pairs = []
    for i in range(0, num_classes - 1, 2):
        a, b = int(order[i]), int(order[i + 1])
        pairs.append((a, b))
        pairs.append((b, a))
    return tuple(pairs)


def corrupt(labels, model: NoiseModel, rng: RngStream) -> CorruptionRecord:
    """Replace each label by a draw from its transition row.

    Sampling is inverse-CDF on one uniform draw per label, so the draw count
    is fixed and the result is bit-reproducible for a given (labels, model,
    rng). Labels mapped to themselves count as clean.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-D sequence")
    if labels.size and (labels.min() < 0 or labels.max() >= model.num_classes):
        raise ValueError("label out of range for the noise model")
    cdf = np.cumsum(model.transition, axis=1)
    cdf[:, -1] = 1.0  # guard against cumsum rounding just below 1
    draws = rng.generator().random(labels.size)
    noisy = np.empty_like(labels)
    for row in range(model.num_classes):
        mask = labels == row
        if mask.any():
            noisy[mask] = np.searchsorted(cdf[row], draws[mask], side="right")
    clean = noisy == labels
    rate = float((~clean).mean()) if labels.size else 0.0
    return CorruptionRecord(noisy, clean, rate)


def check_asymmetric_condition(model: NoiseModel) -> bool:
    """True iff every off-diagonal entry is strictly below its row's
    diagonal, the diagonal-dominance premise of noise tolerance for
    class-dependent noise."""
    t = model.transition
    diag = np.diag(t)
    off = t.copy()
    np.fill_diagonal(off, -np.inf)
    return bool(np.all(off < diag[:, None]))


def transition_to_text(model: NoiseModel) -> str:
    """Serialize the transition matrix as one row per line, entries
    space-separated with full float64 round-trip precision."""
    lines = [" ".join(repr(v) for v in row) for row in model.transition.tolist()]
    return "\n".join(lines)


def transition_from_text(text: str, eta: float) -> NoiseModel:
    """Parse a matrix block written by :func:`transition_to_text`."""
    rows = [
        [float(tok) for tok in line.split()]
        for line in text.strip().splitlines()
        if line.strip()
    ]
    if not rows:
        raise ValueError("empty transition matrix block")
    t = np.array(rows, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError("transition matrix block must be square")
    return NoiseModel(t.shape[0], t, eta)
