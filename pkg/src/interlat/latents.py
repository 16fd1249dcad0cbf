"""Learnable interaction latents and the Gram-matrix orthogonality penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import InvalidDimension, NonFiniteError, TooFewLatents
from .tensor import Tensor

DEFAULT_INIT_SCALE = 0.02


@dataclass
class InteractionLatents:
    """Spatial (n x d) and temporal (m x d) latent matrices."""

    spatial: Tensor
    temporal: Tensor

    def __post_init__(self):
        for name in ("spatial", "temporal"):
            t = getattr(self, name)
            if t.ndim != 2 or min(t.shape) < 1:
                raise InvalidDimension(f"{name} latents must be a non-empty matrix, got {t.shape}")
        if self.spatial.shape[1] != self.temporal.shape[1]:
            raise InvalidDimension("spatial and temporal latents must share the vector dimension")

    @property
    def n(self) -> int:
        return self.spatial.shape[0]

    @property
    def m(self) -> int:
        return self.temporal.shape[0]

    @property
    def d(self) -> int:
        return self.spatial.shape[1]


def init_latents(n: int, m: int, d: int, seed: int = 0, scale: float = DEFAULT_INIT_SCALE,
                 dtype="f64", requires_grad: bool = True) -> InteractionLatents:
    """Draw both latent sets i.i.d. from N(0, scale^2) with a seeded generator.

    ``scale=0`` is accepted and yields all-zero latents.
    """
    if min(n, m, d) < 1:
        raise InvalidDimension(f"n, m, d must be >= 1, got {(n, m, d)}")
    if scale < 0 or not np.isfinite(scale):
        raise InvalidDimension(f"scale must be a finite non-negative number, got {scale}")
    rng = np.random.default_rng(seed)
    spatial = rng.standard_normal((n, d)) * scale
    temporal = rng.standard_normal((m, d)) * scale
    return InteractionLatents(Tensor(spatial, requires_grad, dtype),
                              Tensor(temporal, requires_grad, dtype))


def _row_normalize(L: Tensor) -> Tensor:
    sq = T.reduce_sum(L * L, axis=1, keepdim=True)
    if np.any(sq.data == 0):
        raise NonFiniteError("cannot normalize a zero latent row")
    return L * T.power(sq, -0.5)


def orthogonality_loss(L: Tensor, normalize: bool = False) -> Tensor:
    """Mean squared off-diagonal entry of the Gram matrix ``L @ L.T``.

    The target is the identity, so only the ``k * (k - 1)`` off-diagonal
    entries enter the mean; the diagonal is ignored. With ``normalize`` the
    rows are scaled to unit length first (cosine similarities).
    """
    k = L.shape[0]
    if L.ndim != 2 or k < 2:
        raise TooFewLatents(f"need at least 2 latent rows, got shape {L.shape}")
    if normalize:
        L = _row_normalize(L)
    S = L @ L.T
    off = Tensor(1.0 - np.eye(k), dtype=L.dtype)
    sq = S * S * off
    return T.reduce_sum(sq) * (1.0 / (k * (k - 1)))


def combined_ortho_loss(lat: InteractionLatents, normalize: bool = False) -> Tensor:
    """Sum of the spatial and temporal orthogonality losses."""
    return orthogonality_loss(lat.spatial, normalize) + orthogonality_loss(lat.temporal, normalize)
