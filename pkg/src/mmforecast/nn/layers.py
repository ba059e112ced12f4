"""Parameter management and the layer set used by the forecasting models."""

from __future__ import annotations

import numpy as np

from mmforecast.nn.autodiff import Tensor, tensor


class ParameterStore:
    """Named float64 parameter arrays with deterministic initialization.

    Parameters are registered in a fixed order and drawn from a single
    seeded generator, so two stores built the same way from the same seed
    hold bit-identical values.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        param = tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        self._params[name] = param
        return param

    def affine_init(self, name: str, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, self.rng.uniform(-bound, bound, size=shape))

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: param.value.copy() for name, param in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, value in state.items():
            param = self._params[name]
            value = np.asarray(value, dtype=np.float64)
            if value.shape != param.value.shape:
                raise ValueError(f"shape mismatch for {name!r}: {value.shape} vs {param.value.shape}")
            param.value = value.copy()

    def assert_finite(self) -> None:
        for name, param in self._params.items():
            if not np.all(np.isfinite(param.value)):
                raise ValueError(f"non-finite values in parameter {name!r}")


class Dense:
    """Affine map y = x @ W + b. Works on (..., in_dim) inputs."""

    def __init__(self, store: ParameterStore, prefix: str, in_dim: int, out_dim: int):
        self.weight = store.affine_init(f"{prefix}.W", (in_dim, out_dim), in_dim, out_dim)
        self.bias = store.zeros(f"{prefix}.b", (out_dim,))
        self.in_dim = in_dim
        self.out_dim = out_dim

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"expected trailing dim {self.in_dim}, got {x.shape}")
        return x @ self.weight + self.bias


class Conv1x1(Dense):
    """1x1 convolution over a grid laid out as (..., cells, channels).

    With a kernel that never looks at neighbours, convolution reduces to the
    same affine map at every cell, i.e. a Dense layer over the channel axis.
    """


class GruCell:
    """Standard gated recurrent cell: reset and update gates, tanh candidate."""

    def __init__(self, store: ParameterStore, prefix: str, input_dim: int, hidden_dim: int):
        if input_dim <= 0 or hidden_dim <= 0:
            raise ValueError("input_dim and hidden_dim must be positive")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        make = store.affine_init
        self.w_xr = make(f"{prefix}.W_xr", (input_dim, hidden_dim), input_dim, hidden_dim)
        self.w_hr = make(f"{prefix}.W_hr", (hidden_dim, hidden_dim), hidden_dim, hidden_dim)
        self.b_r = store.zeros(f"{prefix}.b_r", (hidden_dim,))
        self.w_xz = make(f"{prefix}.W_xz", (input_dim, hidden_dim), input_dim, hidden_dim)
        self.w_hz = make(f"{prefix}.W_hz", (hidden_dim, hidden_dim), hidden_dim, hidden_dim)
        self.b_z = store.zeros(f"{prefix}.b_z", (hidden_dim,))
        self.w_xn = make(f"{prefix}.W_xn", (input_dim, hidden_dim), input_dim, hidden_dim)
        self.w_hn = make(f"{prefix}.W_hn", (hidden_dim, hidden_dim), hidden_dim, hidden_dim)
        self.b_n = store.zeros(f"{prefix}.b_n", (hidden_dim,))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        if x.shape[-1] != self.input_dim or h.shape[-1] != self.hidden_dim:
            raise ValueError(
                f"shape mismatch: x {x.shape} (input_dim {self.input_dim}), "
                f"h {h.shape} (hidden_dim {self.hidden_dim})"
            )
        r = (x @ self.w_xr + h @ self.w_hr + self.b_r).sigmoid()
        z = (x @ self.w_xz + h @ self.w_hz + self.b_z).sigmoid()
        n = (x @ self.w_xn + r * (h @ self.w_hn) + self.b_n).tanh()
        return (1.0 - z) * n + z * h


class GruEncoder:
    """Single-layer GRU over a (batch, time, features) sequence.

    Returns the final hidden state; the initial hidden state is zero.
    """

    def __init__(self, store: ParameterStore, prefix: str, input_dim: int, hidden_dim: int):
        self.cell = GruCell(store, prefix, input_dim, hidden_dim)
        self.hidden_dim = hidden_dim

    def __call__(self, sequence: np.ndarray | Tensor) -> Tensor:
        if isinstance(sequence, Tensor):
            steps = [sequence[:, t, :] for t in range(sequence.shape[1])]
        else:
            arr = np.asarray(sequence, dtype=np.float64)
            if arr.ndim != 3:
                raise ValueError(f"expected (batch, time, features), got {arr.shape}")
            steps = [tensor(arr[:, t, :]) for t in range(arr.shape[1])]
        batch = steps[0].shape[0]
        h = tensor(np.zeros((batch, self.hidden_dim)))
        for x_t in steps:
            h = self.cell(x_t, h)
        return h
