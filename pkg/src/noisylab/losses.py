"""Value-and-gradient implementations of the loss family.

Losses: cross entropy (ce), reverse cross entropy (rce), their weighted
symmetric combination (sl), mean absolute error (mae), generalized cross
entropy (gce), the forward noise-matrix correction, and weighted composites
of any two of these. Label smoothing and bootstrap mixing are target
transforms applied before the ce-family losses.

All gradients are taken with respect to the logits, with the softmax chain
rule applied analytically. The batched entry point is
:func:`evaluate_batch`; the per-sample functions wrap it.

Reference formulas (q = target distribution, p = softmax(logits), A < 0 the
log-zero clamp):

    ce   = -sum_k q_k ln p_k              grad_j = p_j - q_j
    rce  = -sum_k p_k clog(q_k)           grad_j = -p_j (clog(q_j) - sum_k p_k clog(q_k))
    sl   = alpha * ce + beta * rce
    mae  = sum_k |p_k - q_k|
    gce  = (1 - p_y^t) / t                for exponent t in (0, 1]
    fwd  = -ln((T^t p)_y)                 for a row-stochastic transition T

where clog(x) = max(ln x, A). For one-hot targets rce has the closed form
-A (1 - p_y), so its gradient reduces to A p_j - A p_j^2 at the labeled
class and -A p_j p_y elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedLossError
from .numerics import clamped_log, log_softmax_rows, softmax_rows

LOSS_KINDS = ("ce", "rce", "sl", "mae", "gce", "forward", "composite")
BOOTSTRAP_MODES = ("none", "soft", "hard")

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class LossSpec:
    """Declarative description of one loss (or a weighted pair of losses).

    Parameters irrelevant to ``kind`` are ignored at evaluation time but are
    still range-checked on construction, so a spec is valid under any kind.
    ``smoothing_eps`` and ``bootstrap_*`` shape the target distribution fed
    to the ce-family losses; ``transition_ref`` names the noise matrix a
    forward loss should be resolved against.
    """

    kind: str
    alpha: float = 1.0
    beta: float = 1.0
    clamp: float = -4.0
    gce_exponent: float = 0.7
    smoothing_eps: float = 0.0
    bootstrap_weight: float = 1.0
    bootstrap_mode: str = "none"
    transition_ref: str | None = None
    composite: tuple[tuple["LossSpec", float], tuple["LossSpec", float]] | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise ValueError("alpha must be finite and >= 0")
        if not (self.beta >= 0 and np.isfinite(self.beta)):
            raise ValueError("beta must be finite and >= 0")
        if not (self.clamp < 0 and np.isfinite(self.clamp)):
            raise ValueError("log-zero clamp A must be finite and negative")
        if not (0 < self.gce_exponent <= 1):
            raise ValueError("gce_exponent must lie in (0, 1]")
        if not (0 <= self.smoothing_eps <= 1):
            raise ValueError("smoothing_eps must lie in [0, 1]")
        if not (0 <= self.bootstrap_weight <= 1):
            raise ValueError("bootstrap_weight must lie in [0, 1]")
        if self.bootstrap_mode not in BOOTSTRAP_MODES:
            raise ValueError(f"unknown bootstrap mode {self.bootstrap_mode!r}")
        if self.kind == "composite":
            if self.composite is None or len(self.composite) != 2:
                raise ValueError("composite spec needs exactly two children")
            for child, weight in self.composite:
                if not isinstance(child, LossSpec):
                    raise ValueError("composite children must be LossSpec")
                if not (np.isfinite(weight) and weight >= 0):
                    raise ValueError("composite weights must be finite and >= 0")
        elif self.composite is not None:
            raise ValueError("composite children given for a non-composite kind")

    def needs_transition(self) -> bool:
        if self.kind == "forward":
            return True
        if self.kind == "composite":
            return any(c.needs_transition() for c, _ in self.composite)
        return False


@dataclass(frozen=True)
class LossResult:
    """Scalar loss value and its gradient with respect to the logits."""

    value: float
    grad_logits: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# target construction
# ---------------------------------------------------------------------------

def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError("label out of range")
    out = np.zeros(labels.shape + (num_classes,), dtype=np.float64)
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def smoothed_target(label: int, eps: float, num_classes: int) -> np.ndarray:
    """Label-smoothed target: (1-eps) + eps/K at the label, eps/K elsewhere."""
    if not (0 <= eps <= 1):
        raise ValueError("smoothing eps must lie in [0, 1]")
    if not (0 <= label < num_classes):
        raise ValueError("label out of range")
    target = np.full(num_classes, eps / num_classes)
    target[label] += 1.0 - eps
    return target


def bootstrap_target(label: int, prediction, weight: float, mode: str) -> np.ndarray:
    """Convex combination of the raw label and the model's own prediction.

    Soft mode mixes the prediction itself; hard mode mixes the one-hot of its
    argmax (ties broken toward the smallest class index). The prediction is
    treated as a constant, never differentiated through.
    """
    if not (0 <= weight <= 1):
        raise ValueError("bootstrap weight must lie in [0, 1]")
    if mode not in ("soft", "hard"):
        raise ValueError(f"unknown bootstrap mode {mode!r}")
    pred = np.asarray(prediction, dtype=np.float64)
    raw = one_hot(label, pred.shape[-1])
    if mode == "hard":
        pred = one_hot(int(np.argmax(pred)), pred.shape[-1])
    return weight * raw + (1.0 - weight) * pred


def build_targets(spec: LossSpec, logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Target distributions for a batch under a spec's target transforms.

    Smoothing applies first, then bootstrap mixing against the (constant)
    softmax predictions of the given logits.
    """
    k = logits.shape[1]
    targets = one_hot(labels, k)
    if spec.smoothing_eps > 0:
        targets = (1.0 - spec.smoothing_eps) * targets + spec.smoothing_eps / k
    if spec.bootstrap_mode != "none":
        preds = softmax_rows(logits)
        if spec.bootstrap_mode == "hard":
            preds = one_hot(np.argmax(preds, axis=1), k)
        targets = spec.bootstrap_weight * targets + (1.0 - spec.bootstrap_weight) * preds
    return targets


def _validate_targets(targets: np.ndarray, num_classes: int) -> np.ndarray:
    t = np.asarray(targets, dtype=np.float64)
    if t.shape[-1] != num_classes:
        raise ValueError("target dimension does not match logits")
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("target weights must lie in [0, 1]")
    if np.any(np.abs(t.sum(axis=-1) - 1.0) > 1e-9):
        raise ValueError("target weights must sum to 1")
    return t


# ---------------------------------------------------------------------------
# batched cores: each returns (values (n,), grads (n, K))
# ---------------------------------------------------------------------------

def _ce_core(logits, targets):
    logp = log_softmax_rows(logits)
    values = -(targets * logp).sum(axis=1)
    grads = np.exp(logp) - targets
    return values, grads


def _rce_core(logits, targets, clamp):
    p = softmax_rows(logits)
    clog = clamped_log(targets, clamp)
    inner = (p * clog).sum(axis=1)
    values = -inner
    grads = -p * (clog - inner[:, None])
    return values, grads


def _sl_core(logits, targets, alpha, beta, clamp):
    # zero-weight terms are skipped outright and unit weights multiply
    # nothing, so sl(1, 0) reproduces ce bit for bit
    values = np.zeros(logits.shape[0])
    grads = np.zeros_like(logits)
    if alpha != 0:
        v, g = _ce_core(logits, targets)
        values = v if alpha == 1 else values + alpha * v
        grads = g if alpha == 1 else grads + alpha * g
    if beta != 0:
        v, g = _rce_core(logits, targets, clamp)
        values = values + (v if beta == 1 else beta * v)
        grads = grads + (g if beta == 1 else beta * g)
    return values, grads


def _mae_core(logits, targets):
    p = softmax_rows(logits)
    diff = p - targets
    values = np.abs(diff).sum(axis=1)
    sign = np.sign(diff)
    grads = p * (sign - (p * sign).sum(axis=1, keepdims=True))
    return values, grads


def _gce_core(logits, labels, exponent):
    p = softmax_rows(logits)
    rows = np.arange(len(labels))
    p_y = p[rows, labels]
    values = (1.0 - p_y**exponent) / exponent
    grads = p_y[:, None] ** exponent * (p - one_hot(labels, logits.shape[1]))
    return values, grads


def _forward_core(logits, labels, transition):
    t = np.asarray(transition, dtype=np.float64)
    k = logits.shape[1]
    if t.shape != (k, k):
        raise ValueError("transition matrix dimension does not match logits")
    if np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("transition matrix must be row-stochastic")
    p = softmax_rows(logits)
    mixed = p @ t
    rows = np.arange(len(labels))
    # machine-epsilon clamp for the pathological all-mass-on-zero column case
    m_y = np.maximum(mixed[rows, labels], _EPS)
    values = -np.log(m_y)
    grads = p * (1.0 - t[:, labels].T / m_y[:, None])
    return values, grads


def evaluate_batch(
    spec: LossSpec,
    logits,
    labels,
    transitions: dict[str, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss values and logit gradients for a batch.

    ``logits`` is (n, K), ``labels`` is (n,) class indices. ``transitions``
    maps transition_ref names to row-stochastic matrices; forward losses
    resolve against it (a spec with no ref uses the entry named "noise").
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError("batch logits must be 2-D")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (logits.shape[0],):
        raise ValueError("labels length does not match logits")
    if np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise ValueError("label out of range")

    kind = spec.kind
    if kind in ("ce", "rce", "sl", "mae"):
        return evaluate_with_targets(spec, logits, build_targets(spec, logits, labels))
    if kind == "gce":
        return _gce_core(logits, labels, spec.gce_exponent)
    if kind == "forward":
        return _forward_core(logits, labels, _resolve_transition(spec, transitions))
    if kind == "composite":
        (spec_a, w_a), (spec_b, w_b) = spec.composite
        va, ga = evaluate_batch(spec_a, logits, labels, transitions)
        vb, gb = evaluate_batch(spec_b, logits, labels, transitions)
        return w_a * va + w_b * vb, w_a * ga + w_b * gb
    raise ValueError(f"unknown loss kind {kind!r}")


def evaluate_with_targets(
    spec: LossSpec, logits, targets
) -> tuple[np.ndarray, np.ndarray]:
    """Batched values and gradients of a target-based loss (ce, rce, sl,
    mae) against explicit target distributions, one row per sample."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError("batch logits must be 2-D")
    targets = _validate_targets(targets, logits.shape[1])
    if targets.shape != logits.shape:
        raise ValueError("targets shape does not match logits")
    kind = spec.kind
    if kind == "ce":
        return _ce_core(logits, targets)
    if kind == "rce":
        return _rce_core(logits, targets, spec.clamp)
    if kind == "sl":
        return _sl_core(logits, targets, spec.alpha, spec.beta, spec.clamp)
    if kind == "mae":
        return _mae_core(logits, targets)
    raise ValueError(f"loss kind {kind!r} does not take explicit targets")


def _resolve_transition(spec, transitions):
    ref = spec.transition_ref or "noise"
    if not transitions or ref not in transitions:
        raise ValueError(f"forward loss needs a transition matrix named {ref!r}")
    return transitions[ref]


# ---------------------------------------------------------------------------
# per-sample API
# ---------------------------------------------------------------------------

def _single(values, grads) -> LossResult:
    return LossResult(float(values[0]), grads[0])


def _prep_single(logits, targets=None):
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("logits must be a 1-D sequence")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    if targets is None:
        return z[None, :], None
    t = _validate_targets(targets, z.shape[0])
    return z[None, :], t[None, :]


def ce_loss(logits, target) -> LossResult:
    """Cross entropy against an arbitrary target distribution."""
    z, t = _prep_single(logits, target)
    return _single(*_ce_core(z, t))


def rce_loss(logits, target, clamp: float) -> LossResult:
    """Reverse cross entropy -sum_k p_k clog(q_k) with clog(0) = clamp < 0."""
    if not (np.isfinite(clamp) and clamp < 0):
        raise ValueError("log-zero clamp A must be finite and negative")
    z, t = _prep_single(logits, target)
    return _single(*_rce_core(z, t, clamp))


def sl_loss(logits, target, alpha: float, beta: float, clamp: float) -> LossResult:
    """Weighted symmetric combination alpha * ce + beta * rce."""
    LossSpec(kind="sl", alpha=alpha, beta=beta, clamp=clamp)  # range checks
    z, t = _prep_single(logits, target)
    return _single(*_sl_core(z, t, alpha, beta, clamp))


def mae_loss(logits, target) -> LossResult:
    """Mean absolute error sum_k |p_k - q_k| between softmax and target."""
    z, t = _prep_single(logits, target)
    return _single(*_mae_core(z, t))


def gce_loss(logits, label: int, exponent: float) -> LossResult:
    """Generalized cross entropy (1 - p_y^t) / t for exponent t in (0, 1]."""
    if not (0 < exponent <= 1):
        raise ValueError("gce exponent must lie in (0, 1]")
    z, _ = _prep_single(logits)
    return _single(*_gce_core(z, np.array([label]), exponent))


def forward_loss(logits, label: int, transition) -> LossResult:
    """Noise-corrected cross entropy on the transition-mixed prediction."""
    z, _ = _prep_single(logits)
    return _single(*_forward_core(z, np.array([label]), transition))


def composite_loss(
    spec_a: LossSpec,
    weight_a: float,
    spec_b: LossSpec,
    weight_b: float,
    logits,
    label: int,
    transitions: dict[str, np.ndarray] | None = None,
) -> LossResult:
    """Weighted sum of two losses evaluated on the same sample."""
    spec = LossSpec(
        kind="composite", composite=((spec_a, weight_a), (spec_b, weight_b))
    )
    z, _ = _prep_single(logits)
    return _single(*evaluate_batch(spec, z, np.array([label]), transitions))


# ---------------------------------------------------------------------------
# probability-space evaluation (for risk analysis over fixed classifiers)
# ---------------------------------------------------------------------------

def values_from_probs(spec: LossSpec, probs, labels) -> np.ndarray:
    """Loss values computed directly from predicted distributions.

    Supports losses that are functions of (p, label) alone: ce, rce, sl,
    mae, gce, and composites thereof. Forward needs a logits context and is
    rejected. Values may be +inf (ce of a zero predicted probability); that
    is the honest value, not an error.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("probs must be 2-D (samples x classes)")
    labels = np.asarray(labels, dtype=np.int64)
    k = p.shape[1]
    kind = spec.kind
    if kind in ("forward",):
        raise UnsupportedLossError("forward loss is not evaluable from probabilities alone")
    if kind == "composite":
        (spec_a, w_a), (spec_b, w_b) = spec.composite
        return w_a * values_from_probs(spec_a, p, labels) + w_b * values_from_probs(
            spec_b, p, labels
        )
    if kind == "gce":
        rows = np.arange(len(labels))
        return (1.0 - p[rows, labels] ** spec.gce_exponent) / spec.gce_exponent

    targets = one_hot(labels, k)
    if spec.smoothing_eps > 0:
        targets = (1.0 - spec.smoothing_eps) * targets + spec.smoothing_eps / k
    if spec.bootstrap_mode != "none":
        preds = one_hot(np.argmax(p, axis=1), k) if spec.bootstrap_mode == "hard" else p
        targets = spec.bootstrap_weight * targets + (1.0 - spec.bootstrap_weight) * preds

    if kind == "ce":
        return _ce_from_probs(p, targets)
    if kind == "rce":
        return -(p * clamped_log(targets, spec.clamp)).sum(axis=1)
    if kind == "sl":
        out = np.zeros(len(labels))
        if spec.alpha != 0:
            out = out + spec.alpha * _ce_from_probs(p, targets)
        if spec.beta != 0:
            out = out + spec.beta * -(p * clamped_log(targets, spec.clamp)).sum(axis=1)
        return out
    if kind == "mae":
        return np.abs(p - targets).sum(axis=1)
    raise ValueError(f"unknown loss kind {kind!r}")


def _ce_from_probs(p, targets):
    # q * log p with the 0 * log 0 = 0 convention; q > 0 against p = 0 is +inf
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(targets > 0, targets * np.log(p), 0.0)
    return -terms.sum(axis=1)
