"""Soft nearest-neighbour quantization of hidden states against a latent set."""

from __future__ import annotations

from dataclasses import dataclass

from . import tensor as T
from .errors import DimMismatch, NonPositiveTemperature
from .tensor import Tensor

DEFAULT_TAU = 1.0


@dataclass(frozen=True)
class QuantConfig:
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not self.tau > 0:
            raise NonPositiveTemperature(f"tau must be > 0, got {self.tau}")


def squared_distances(V: Tensor, L: Tensor) -> Tensor:
    """(N, k) squared Euclidean distances via |v|^2 + |l|^2 - 2 v.l."""
    vv = T.reduce_sum(V * V, axis=1, keepdim=True)
    ll = T.reduce_sum(L * L, axis=1, keepdim=True).T
    return vv + ll - (V @ L.T) * 2.0


def soft_assign(V: Tensor, L: Tensor, tau: float) -> Tensor:
    """Softmax weights over latents for every row of ``V``; shape (N, k)."""
    D = squared_distances(V, L)
    return T.softmax(D * (-1.0 / tau), axis=1)


def soft_quantize(V: Tensor, L: Tensor, cfg: QuantConfig | float = DEFAULT_TAU) -> Tensor:
    """Replace every channel vector of ``V`` by a distance-weighted mix of latent rows.

    ``V`` has any leading shape with channels last (normally ``(b, f, h, w, c)``);
    ``L`` is ``(k, c)``. The result has the shape of ``V`` and is differentiable
    with respect to both inputs.
    """
    tau = cfg.tau if isinstance(cfg, QuantConfig) else QuantConfig(float(cfg)).tau
    c = V.shape[-1]
    if L.ndim != 2 or L.shape[1] != c:
        raise DimMismatch(f"hidden channels {c} != latent dim {L.shape[-1]}")
    flat = V.reshape(-1, c)
    w = soft_assign(flat, L, tau)
    return (w @ L).reshape(V.shape)
