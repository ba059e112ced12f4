"""First-order adaptive optimizer with per-parameter moment estimates."""

from __future__ import annotations

import numpy as np

from mmforecast.nn.layers import ParameterStore


class LearningError(RuntimeError):
    """Raised when optimization hits a non-finite gradient or parameter."""


class Adam:
    """Adam over a ParameterStore, optionally restricted to a name subset."""

    def __init__(
        self,
        store: ParameterStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        parameter_names: list[str] | None = None,
    ):
        self.store = store
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        if parameter_names is None:
            parameter_names = store.names()
        unknown = [n for n in parameter_names if n not in store]
        if unknown:
            raise ValueError(f"unknown parameters: {unknown}")
        self.parameter_names = list(parameter_names)
        self.t = 0
        self.m = {n: np.zeros_like(store[n].value) for n in self.parameter_names}
        self.v = {n: np.zeros_like(store[n].value) for n in self.parameter_names}

    def step(self) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for name in self.parameter_names:
            param = self.store[name]
            grad = param.grad
            if grad is None:
                grad = np.zeros_like(param.value)
            if not np.all(np.isfinite(grad)):
                raise LearningError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            param.value = param.value - self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if not np.all(np.isfinite(param.value)):
                raise LearningError(f"non-finite values in parameter {name!r} after update")

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name in self.parameter_names:
            out[f"optim.m.{name}"] = self.m[name].copy()
            out[f"optim.v.{name}"] = self.v[name].copy()
        return out

    def state_meta(self) -> dict:
        return {
            "t": self.t,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "parameter_names": self.parameter_names,
        }

    def load_state(self, arrays: dict[str, np.ndarray], meta: dict) -> None:
        if meta["parameter_names"] != self.parameter_names:
            raise ValueError("optimizer parameter set mismatch")
        self.t = int(meta["t"])
        for name in self.parameter_names:
            self.m[name] = np.array(arrays[f"optim.m.{name}"], dtype=np.float64)
            self.v[name] = np.array(arrays[f"optim.v.{name}"], dtype=np.float64)
