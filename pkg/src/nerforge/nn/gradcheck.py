"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .store import ParameterStore
from .tensor import Tensor


class NonFiniteLossError(Exception):
    pass


def gradient_check(
    loss_fn: Callable[[ParameterStore], Tensor],
    store: ParameterStore,
    eps: float = 1e-6,
    params: list[str] | None = None,
) -> tuple[float, str]:
    """Compare analytic gradients against central differences.

    ``loss_fn`` must rebuild the forward graph from the store every call and
    return a scalar Tensor.  For every component of every parameter the
    analytic gradient is compared with (f(t+eps) - f(t-eps)) / 2 eps; the
    relative error is |a - n| / max(1, |a|, |n|), which guards against blowup
    on near-zero components while still flagging real disagreements.

    Returns (max relative error, worst offender as "name[flat_index]").
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-6, 1e-4]")
    store.zero_grads()
    loss = loss_fn(store)
    if not np.isfinite(loss.data):
        raise NonFiniteLossError(f"loss is {float(loss.data)}")
    loss.backward()
    names = params if params is not None else store.names()
    analytic = {name: store.grads[name].copy() for name in names}

    def eval_loss() -> float:
        value = float(loss_fn(store).data)
        if not np.isfinite(value):
            raise NonFiniteLossError(f"loss is {value}")
        return value

    worst = 0.0
    worst_name = ""
    for name in names:
        value = store.values[name]
        flat = value.reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            f_plus = eval_loss()
            flat[idx] = original - eps
            f_minus = eval_loss()
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = grad_flat[idx]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
                worst_name = f"{name}[{idx}]"
    return worst, worst_name
