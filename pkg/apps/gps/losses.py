"""Surrogate losses for the 0-1 loss 1{u < 0}."""
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, UnsupportedOperationError

HINGE = 'hinge'
HUBERIZED = 'huberized'

LOSS_CHOICES = [
    (HINGE, 'Hinge'),
    (HUBERIZED, 'Huberized squared hinge'),
]

DEFAULT_DELTA = 0.1


@dataclass(frozen=True)
class LossSpec:
    kind: str = HINGE
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.kind not in dict(LOSS_CHOICES):
            raise InputError(f'Unknown loss: {self.kind!r}')
        if self.kind == HUBERIZED and not 0 < self.delta < 1:
            raise InputError(f'Huberized loss needs delta in (0, 1), got {self.delta!r}')

    @property
    def differentiable(self):
        return self.kind == HUBERIZED


HUBERIZED_LOSS = LossSpec(HUBERIZED, DEFAULT_DELTA)


def _unwrap(value, original):
    if np.ndim(original) == 0:
        return float(value)
    return value


def loss(spec, u):
    u_arr = np.asarray(u, dtype=float)
    if spec.kind == HINGE:
        value = np.maximum(0.0, 1.0 - u_arr)
    else:
        delta = spec.delta
        value = np.where(
            u_arr <= 1.0 - delta,
            1.0 - u_arr,
            np.where(u_arr <= 1.0 + delta, (1.0 - u_arr + delta) ** 2 / (4.0 * delta), 0.0),
        )
    return _unwrap(value, u)


def loss_grad(spec, u):
    if spec.kind != HUBERIZED:
        raise UnsupportedOperationError('The hinge loss has no derivative at its kink; use the huberized loss')
    u_arr = np.asarray(u, dtype=float)
    delta = spec.delta
    value = np.where(
        u_arr <= 1.0 - delta,
        -1.0,
        np.where(u_arr <= 1.0 + delta, -(1.0 - u_arr + delta) / (2.0 * delta), 0.0),
    )
    return _unwrap(value, u)
