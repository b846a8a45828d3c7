"""Low-level numeric primitives: stable softmax machinery, the clamped
logarithm that realizes log(0) = A, and reproducible random streams.

Everything here is a pure function over float64 arrays. Random state is
carried explicitly by :class:`RngStream`; nothing touches numpy's global
generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def softmax(logits) -> np.ndarray:
    """Softmax of a 1-D logit vector, computed with max subtraction.

    The output is a valid probability vector for any finite input, even for
    logits far outside the exp range.
    """
    z = _as_float_array(logits, "logits")
    if z.ndim != 1 or z.size == 0:
        raise ValueError("logits must be a non-empty 1-D sequence")
    return softmax_rows(z[None, :])[0]


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-D array (one distribution per row)."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise log softmax; avoids the exp/log round trip of log(softmax)."""
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def log_sum_exp(logits) -> float:
    """ln(sum(exp(z_j))), computed max-shifted so huge logits do not overflow."""
    z = _as_float_array(logits, "logits")
    if z.size == 0:
        raise ValueError("log_sum_exp of an empty sequence")
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def clamped_log(x, floor: float):
    """Natural log clamped from below: max(ln x, floor), with floor < 0.

    Defined on [0, 1]. At x = 0 the value is exactly ``floor`` (this is the
    log(0) = A convention); at x = 1 it is exactly 0; above e^floor it is
    exactly ln x. Clamping the output rather than the input keeps the
    function continuous and bias-free at x = 1. Accepts scalars or arrays.
    """
    if not np.isfinite(floor) or floor >= 0:
        raise ValueError("clamp floor A must be a finite negative number")
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("clamped_log input must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        out = np.maximum(np.log(arr), floor)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def validate_prob_vector(p, tol: float = 1e-9) -> np.ndarray:
    """Check that p is a probability vector (entries in [0,1], sums to 1)."""
    arr = _as_float_array(p, "probability vector")
    if arr.ndim != 1:
        raise ValueError("probability vector must be 1-D")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"probabilities must sum to 1 within {tol}")
    return arr


def _splitmix64(x: int) -> int:
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Identical (seed, stream) always reproduces the identical draw sequence;
    distinct stream ids index statistically independent streams of the same
    seed, so parallel runs can split work without sharing state. Backed by
    the counter-based Philox generator with (seed, stream) as its key.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        key = np.array(
            [self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        """Derive the index-th child stream, independent of this one."""
        child = _splitmix64((self.stream * 0x9E3779B97F4A7C15 + index + 1) & _MASK64)
        return RngStream(self.seed, child)

    def derive_seed(self) -> int:
        """A 63-bit seed deterministically derived from this stream."""
        return int(self.generator().integers(0, 1 << 63))
