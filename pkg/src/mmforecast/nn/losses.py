"""Loss functions: variance-weighted reconstruction and weighted BCE."""

from __future__ import annotations

import numpy as np

from mmforecast.nn.autodiff import Tensor, _as_tensor

VAR_MIN = 1e-6
VAR_MAX = 1e6
# inner log-space bounds sit a hair outside [log VAR_MIN, log VAR_MAX] so the
# exact outer clamp always engages once the inner one saturates
_LOG_VAR_MIN = float(np.log(VAR_MIN)) - 1e-9
_LOG_VAR_MAX = float(np.log(VAR_MAX)) + 1e-9
PROB_EPS = 1e-7


def variance_from_raw(raw: Tensor) -> Tensor:
    """Map a raw head output to a variance in [VAR_MIN, VAR_MAX].

    The inner clamp happens in log space so exp never overflows; the outer
    clamp pins the bounds exactly.
    """
    raw = _as_tensor(raw)
    return raw.clip(_LOG_VAR_MIN, _LOG_VAR_MAX).exp().clip(VAR_MIN, VAR_MAX)


def heteroscedastic_nll(pred: Tensor, target: np.ndarray | Tensor, raw_log_var: Tensor) -> Tensor:
    """Mean over frames and joints of error/sigma^2 + log sigma^2.

    `pred` and `target` have shape (..., frames, joints, 3); the error is
    the squared L2 norm of the per-joint 3D residual. `raw_log_var` has
    shape (..., frames, joints) and parameterizes sigma^2 = exp(raw),
    clamped to [VAR_MIN, VAR_MAX]. For fixed predictions the minimizing
    sigma^2 per joint is exactly that joint's squared error.
    """
    pred = _as_tensor(pred)
    target = _as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"pred/target shape mismatch: {pred.shape} vs {target.shape}")
    if raw_log_var.shape != pred.shape[:-1]:
        raise ValueError(
            f"variance grid shape {raw_log_var.shape} does not match pose shape {pred.shape}"
        )
    error = ((pred - target) ** 2).sum(axis=-1)
    sigma2 = variance_from_raw(raw_log_var)
    return (error / sigma2 + sigma2.log()).mean()


def weighted_bce(probs: Tensor, targets: np.ndarray | Tensor, positive_weight: float = 1.0) -> Tensor:
    """Binary cross-entropy with an extra penalty on missed positives.

    Predicted probabilities are clamped to [PROB_EPS, 1-PROB_EPS] so the
    logs stay finite on the full [0, 1] input domain.
    """
    if positive_weight <= 0:
        raise ValueError("positive_weight must be positive")
    probs = _as_tensor(probs)
    targets = _as_tensor(targets)
    if probs.shape != targets.shape:
        raise ValueError(f"probs/targets shape mismatch: {probs.shape} vs {targets.shape}")
    p = probs.clip(PROB_EPS, 1.0 - PROB_EPS)
    loss = targets * p.log() * positive_weight + (1.0 - targets) * (1.0 - p).log()
    return -loss.mean()
