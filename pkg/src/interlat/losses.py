"""Region-amplified diffusion loss and the total training objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import RegionMasks
from .errors import ShapeMismatch
from .tensor import Tensor

LAMBDA_HAND = 5.0
LAMBDA_FACE = 2.0
BETA = 1e-4


@dataclass(frozen=True)
class LossConfig:
    lambda_hand: float = LAMBDA_HAND
    lambda_face: float = LAMBDA_FACE
    beta: float = BETA
    weighted_mean: bool = False

    def __post_init__(self):
        if self.lambda_hand <= 0 or self.lambda_face <= 0:
            raise ValueError("amplification factors must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")


@dataclass(frozen=True)
class LatentPair:
    z: Tensor
    z_hat: Tensor
    latent_masks: RegionMasks


def amplification_weights(mask, lambda_r: float) -> np.ndarray:
    """``lambda_r`` where the mask is positive, 1 elsewhere."""
    if lambda_r <= 0:
        raise ValueError("lambda_r must be positive")
    mask = np.asarray(mask, dtype=np.float64)
    return np.where(mask > 0, float(lambda_r), 1.0)


def downsample_mask(mask, factor: int) -> np.ndarray:
    """Max-pool the two spatial axes of a ``(..., H, W, 1)`` mask by ``factor``.

    A latent cell is marked when any pixel it covers is marked.
    """
    mask = np.asarray(mask)
    H, W = mask.shape[-3], mask.shape[-2]
    if H % factor or W % factor:
        raise ShapeMismatch(f"mask size {(H, W)} not divisible by {factor}")
    lead = mask.shape[:-3]
    blocks = mask.reshape(*lead, H // factor, factor, W // factor, factor, mask.shape[-1])
    return (blocks > 0).any(axis=(-4, -2)).astype(mask.dtype)


def diffusion_loss(pair: LatentPair, cfg: LossConfig = LossConfig()) -> Tensor:
    """Mean over elements of ``(z - z_hat)^2 * W_hand * W_face``.

    Masks broadcast over channels. With ``cfg.weighted_mean`` the sum is
    divided by the total weight instead of the element count.
    """
    z, z_hat = pair.z, pair.z_hat
    if z.shape != z_hat.shape:
        raise ShapeMismatch(f"target {z.shape} != prediction {z_hat.shape}")
    w = (amplification_weights(pair.latent_masks.hand, cfg.lambda_hand)
         * amplification_weights(pair.latent_masks.face, cfg.lambda_face))
    try:
        w = np.broadcast_to(w, z.shape)
    except ValueError:
        raise ShapeMismatch(f"masks {w.shape} do not broadcast to {z.shape}") from None
    err = z_hat - z
    weighted = err * err * Tensor(w, dtype=err.dtype)
    denom = w.sum() if cfg.weighted_mean else w.size
    return T.reduce_sum(weighted) * (1.0 / denom)


def total_loss(diff, ortho, beta: float = BETA) -> Tensor:
    """``diff + beta * ortho``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return T.add(diff, T.mul(ortho, float(beta)))
