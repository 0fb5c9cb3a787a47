"""Dense numeric primitives: masked softmax, log-sum-exp, seeded RNG, Adam.

Arrays are plain ``numpy.ndarray`` (float64, row-major).  Availability masks
are boolean arrays broadcastable against the utilities.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ADAM_LR = 0.001
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-7
DEFAULT_CLIPNORM = 50.0


class NoAvailableAlternatives(ValueError):
    pass


def _masked(v, mask):
    v = np.asarray(v, dtype=np.float64)
    if mask is None:
        mask = np.ones(v.shape, dtype=bool)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), v.shape)
    if not np.all(mask.any(axis=-1)):
        raise NoAvailableAlternatives("no available alternatives")
    # -inf sentinel removes unavailable alternatives from max and sum alike
    return np.where(mask, v, -np.inf), mask


def softmax(v, mask=None):
    """Softmax along the last axis restricted to available entries.

    Unavailable entries get probability exactly 0.
    """
    vm, mask = _masked(v, mask)
    shifted = vm - vm.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(v, mask=None):
    vm, mask = _masked(v, mask)
    vmax = vm.max(axis=-1, keepdims=True)
    shifted = vm - vmax
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return np.where(mask, shifted - lse, -np.inf)


def log_sum_exp(v, mask=None):
    """``log(sum(exp(v)))`` over available entries of the last axis."""
    vm, _ = _masked(v, mask)
    vmax = vm.max(axis=-1)
    return vmax + np.log(np.exp(vm - vmax[..., None]).sum(axis=-1))


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def bernoulli(rng: np.random.Generator, p: float, size) -> np.ndarray:
    """Boolean draws that are True with probability ``p``."""
    return rng.random(size) < p


def global_norm(grads: np.ndarray) -> float:
    return float(np.sqrt(np.dot(grads, grads)))


def clip_by_global_norm(grads: np.ndarray, clipnorm: float | None) -> np.ndarray:
    if clipnorm is None or not np.isfinite(clipnorm):
        return grads
    norm = global_norm(grads)
    if norm > clipnorm:
        return grads * (clipnorm / norm)
    return grads


@dataclass
class AdamState:
    size: int
    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    clipnorm: float | None = DEFAULT_CLIPNORM
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    t: int = field(init=False, default=0)

    def __post_init__(self):
        self.m = np.zeros(self.size)
        self.v = np.zeros(self.size)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update on a flat parameter vector.

    The gradient is rescaled to ``state.clipnorm`` first when its global L2
    norm exceeds it.  ``state`` is advanced in place; the updated parameters
    are returned as a new array.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape}"
        )
    g = clip_by_global_norm(grads, state.clipnorm)
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
