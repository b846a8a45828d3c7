"""noisylab: a desk-scale laboratory for learning with noisy labels.

Provides the symmetric ce/rce loss family with analytic gradients,
controlled label-noise injection, a from-scratch MLP trainer, exact
noisy-risk analysis, and a CLI for experiments and verification runs.
"""

from .errors import (
    ConfigError,
    DivergenceError,
    EmptySubsetError,
    IdxFormatError,
    NoisyLabError,
    ResourceLimitError,
    UnsupportedLossError,
)
from .losses import (
    LossResult,
    LossSpec,
    bootstrap_target,
    ce_loss,
    composite_loss,
    evaluate_batch,
    forward_loss,
    gce_loss,
    mae_loss,
    rce_loss,
    sl_loss,
    smoothed_target,
)
from .noise import (
    CorruptionRecord,
    MNIST_FLIP_PAIRS,
    NoiseModel,
    check_asymmetric_condition,
    corrupt,
    pairflip_matrix,
    symmetric_matrix,
)
from .numerics import RngStream, clamped_log, log_sum_exp, softmax
from .theory import (
    RiskReport,
    brute_force_minimizers,
    empirical_risk,
    expected_noisy_risk,
    verify_symmetric_identity,
)
from .trainer import MlpModel, TrainConfig, TrainRun, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CorruptionRecord",
    "DivergenceError",
    "EmptySubsetError",
    "IdxFormatError",
    "LossResult",
    "LossSpec",
    "MNIST_FLIP_PAIRS",
    "MlpModel",
    "NoiseModel",
    "NoisyLabError",
    "ResourceLimitError",
    "RiskReport",
    "RngStream",
    "TrainConfig",
    "TrainRun",
    "UnsupportedLossError",
    "bootstrap_target",
    "brute_force_minimizers",
    "ce_loss",
    "check_asymmetric_condition",
    "clamped_log",
    "composite_loss",
    "corrupt",
    "empirical_risk",
    "evaluate_batch",
    "expected_noisy_risk",
    "forward_loss",
    "gce_loss",
    "log_sum_exp",
    "mae_loss",
    "pairflip_matrix",
    "rce_loss",
    "sl_loss",
    "smoothed_target",
    "softmax",
    "symmetric_matrix",
    "train",
    "verify_symmetric_identity",
]
