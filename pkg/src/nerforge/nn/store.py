"""Named trainable parameters with gradient accumulators, plus optimizers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeMismatchError, Tensor


class ParameterStore:
    """Float64 parameter arrays addressed by unique names.

    Each entry carries a same-shape gradient accumulator.  Matrices are
    initialized uniformly in +-sqrt(6 / (fan_in + fan_out)); vectors start
    at zero.  The store owns the RNG used for initialization so that a seed
    fully determines the parameters.
    """

    def __init__(self, seed: int = 0):
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.rng = np.random.default_rng(seed)

    def add(self, name: str, shape: tuple[int, ...], init: str = "auto") -> np.ndarray:
        if name in self.values:
            raise ValueError(f"duplicate parameter {name!r}")
        if init == "auto":
            init = "uniform" if len(shape) == 2 else "zeros"
        if init == "zeros":
            value = np.zeros(shape)
        elif init == "uniform":
            fan_out, fan_in = shape if len(shape) == 2 else (shape[0], shape[0])
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            value = self.rng.uniform(-bound, bound, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.values[name] = value
        self.grads[name] = np.zeros(shape)
        return value

    def tensor(self, name: str) -> Tensor:
        """A graph leaf whose gradient accumulates into the stored buffer."""
        t = Tensor(self.values[name])
        t.grad = self.grads[name]
        return t

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def names(self) -> list[str]:
        return list(self.values)

    def n_parameters(self) -> int:
        return sum(v.size for v in self.values.values())

    def clone_values(self) -> dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.values.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        """Copy values in place; shapes must match the registered entries."""
        for name, value in values.items():
            if name not in self.values:
                raise KeyError(f"unknown parameter {name!r}")
            if self.values[name].shape != value.shape:
                raise ShapeMismatchError(
                    f"{name}: stored {self.values[name].shape} vs loaded {value.shape}"
                )
            self.values[name][...] = value


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


class Optimizer:
    """SGD or Adam over a ParameterStore; deterministic given its state.

    Weight decay is applied as a classic L2 term folded into the gradient.
    Parameters listed in ``frozen`` are skipped entirely.
    """

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, store: ParameterStore, frozen: frozenset[str] | set[str] = frozenset()) -> None:
        cfg = self.config
        self.t += 1
        for name, value in store.values.items():
            if name in frozen:
                continue
            grad = store.grads[name]
            if cfg.weight_decay:
                grad = grad + cfg.weight_decay * value
            if cfg.kind == "sgd":
                value -= cfg.learning_rate * grad
                continue
            m = self._m.setdefault(name, np.zeros_like(value))
            v = self._v.setdefault(name, np.zeros_like(value))
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * grad * grad
            m_hat = m / (1.0 - cfg.beta1**self.t)
            v_hat = v / (1.0 - cfg.beta2**self.t)
            value -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def optimizer_step(store: ParameterStore, config: OptimizerConfig) -> Optimizer:
    """One-shot update; returns the optimizer so callers may keep its state."""
    opt = Optimizer(config)
    opt.step(store)
    return opt
