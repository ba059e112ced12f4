"""Minimal differentiable-computation toolkit.

Float64 reverse-mode autodiff over numpy arrays, the handful of layers the
forecasting models need (dense, GRU, 1x1 grid convolution), the two loss
functions, an Adam optimizer, and a bit-exact binary checkpoint container.
"""

from mmforecast.nn.autodiff import ComputationTape, Tensor, concat, stack, tensor
from mmforecast.nn.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from mmforecast.nn.layers import Conv1x1, Dense, GruCell, GruEncoder, ParameterStore
from mmforecast.nn.losses import heteroscedastic_nll, variance_from_raw, weighted_bce
from mmforecast.nn.optim import Adam, LearningError

__all__ = [
    "Adam",
    "Checkpoint",
    "CheckpointError",
    "ComputationTape",
    "Conv1x1",
    "Dense",
    "GruCell",
    "GruEncoder",
    "LearningError",
    "ParameterStore",
    "Tensor",
    "concat",
    "heteroscedastic_nll",
    "load_checkpoint",
    "save_checkpoint",
    "stack",
    "tensor",
    "variance_from_raw",
    "weighted_bce",
]
