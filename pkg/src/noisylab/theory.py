"""Risk analysis over fixed classifiers: exact noisy-risk expectations, the
symmetric-noise risk identity, and brute-force global-minimizer checks on
tiny enumerable instances.

A fixed classifier here is just a table of predicted distributions, one per
sample. The expectation over label noise is computed exactly through the
transition matrix, never sampled, so identities hold to float64 precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ResourceLimitError
from .losses import LossSpec, values_from_probs
from .noise import NoiseModel, symmetric_matrix

_TIE_TOL = 1e-12
_MAX_TUPLES = 20_000_000


@dataclass(frozen=True)
class RiskReport:
    """Both sides of the symmetric-noise risk identity and their residual."""

    clean_risk: float
    noisy_risk_analytic: float
    predicted_noisy_risk: float
    residual: float


def _check_classifier(probs, labels):
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or len(p) != len(y):
        raise ValueError("classifier table and labels must align")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("classifier rows must be probability vectors")
    if y.size and (y.min() < 0 or y.max() >= p.shape[1]):
        raise ValueError("label out of range")
    return p, y


def empirical_risk(probs, labels, loss: LossSpec) -> float:
    """Mean loss of a fixed classifier under the given labels."""
    p, y = _check_classifier(probs, labels)
    return float(values_from_probs(loss, p, y).mean())


def loss_table(probs, loss: LossSpec) -> np.ndarray:
    """ell(p_i, k) for every sample i and candidate label k, shape (n, K)."""
    p = np.asarray(probs, dtype=np.float64)
    n, k = p.shape
    tiled = np.repeat(p, k, axis=0)
    labels = np.tile(np.arange(k), n)
    return values_from_probs(loss, tiled, labels).reshape(n, k)


def expected_noisy_risk(probs, labels, loss: LossSpec, model: NoiseModel) -> float:
    """Exact expected risk under label noise:
    mean_i sum_k T[y_i][k] * ell(p_i, k)."""
    p, y = _check_classifier(probs, labels)
    if p.shape[1] != model.num_classes:
        raise ValueError("noise model class count does not match the classifier")
    table = loss_table(p, loss)
    rows = model.transition[y]
    # 0 * inf would poison the sum; zero-probability flips contribute nothing
    with np.errstate(invalid="ignore"):
        terms = np.where(rows > 0, rows * table, 0.0)
    return float(terms.sum(axis=1).mean())


def verify_symmetric_identity(
    probs, labels, eta: float, clamp: float, num_classes: int
) -> RiskReport:
    """Check R_noisy = (1 - eta K / (K-1)) R_clean - A eta for the reverse
    cross entropy loss under uniform noise, computing both sides
    independently."""
    loss = LossSpec(kind="rce", clamp=clamp)
    clean = empirical_risk(probs, labels, loss)
    analytic = expected_noisy_risk(probs, labels, loss, symmetric_matrix(num_classes, eta))
    predicted = (1.0 - eta * num_classes / (num_classes - 1)) * clean - clamp * eta
    return RiskReport(
        clean_risk=clean,
        noisy_risk_analytic=analytic,
        predicted_noisy_risk=predicted,
        residual=abs(analytic - predicted),
    )


def simplex_grid(num_classes: int, points_per_edge: int) -> np.ndarray:
    """All probability vectors with entries on the lattice i/(points_per_edge-1).

    Row count is C(m + K - 1, K - 1) for m = points_per_edge - 1.
    """
    if points_per_edge < 2:
        raise ValueError("need at least 2 points per simplex edge")
    m = points_per_edge - 1
    rows = []

    def fill(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            fill(prefix + [v], remaining - v, slots - 1)

    fill([], m, num_classes)
    return np.array(rows, dtype=np.float64) / m


def brute_force_minimizers(
    labels,
    loss: LossSpec,
    model: NoiseModel,
    grid_resolution: int,
) -> tuple[frozenset[tuple[int, ...]], frozenset[tuple[int, ...]]]:
    """Enumerate every simplex-grid classifier on a tiny instance and return
    the argmin sets of the clean risk and of the exact noisy risk.

    Each returned element is a tuple of grid-point indices, one per sample,
    indexing rows of ``simplex_grid(K, grid_resolution)``. Ties within 1e-12
    of the minimum are grouped into the argmin set.
    """
    y = np.asarray(labels, dtype=np.int64)
    k = model.num_classes
    n = len(y)
    if n == 0 or y.min() < 0 or y.max() >= k:
        raise ValueError("labels must be non-empty and within the class count")
    if n > 4 or k > 3 or grid_resolution > 21:
        raise ResourceLimitError(
            "brute force supports at most 4 samples, 3 classes, 21 grid points per edge"
        )
    grid_points = comb(grid_resolution - 1 + k - 1, k - 1)
    if grid_points**n > _MAX_TUPLES:
        raise ResourceLimitError(
            f"{grid_points}^{n} classifier tuples exceed the enumeration budget"
        )
    grid = simplex_grid(k, grid_resolution)
    table = loss_table(grid, loss)  # (G, K)

    clean_per_sample = table[:, y].T  # (n, G)
    rows = model.transition[y]  # (n, K)
    with np.errstate(invalid="ignore"):
        noisy_per_sample = np.where(
            rows[:, None, :] > 0, rows[:, None, :] * table[None], 0.0
        ).sum(axis=2)  # (n, G)

    def argmin_tuples(per_sample):
        total = np.zeros(())
        for i in range(n):
            total = total[..., None] + per_sample[i]
        flat = total.reshape(-1)
        cutoff = flat.min() + _TIE_TOL * n
        hits = np.flatnonzero(flat <= cutoff)
        shape = (len(grid),) * n
        return frozenset(
            tuple(int(v) for v in idx) for idx in zip(*np.unravel_index(hits, shape))
        )

    return argmin_tuples(clean_per_sample), argmin_tuples(noisy_per_sample)


def min_clean_risk(labels, loss: LossSpec, num_classes: int, grid_resolution: int) -> float:
    """Smallest clean risk any grid classifier attains (per-sample separable)."""
    y = np.asarray(labels, dtype=np.int64)
    grid = simplex_grid(num_classes, grid_resolution)
    table = loss_table(grid, loss)
    return float(table[:, y].min(axis=0).mean())
