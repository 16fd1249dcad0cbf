"""Identity path: projected face embeddings attended to by the hidden states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import (
    AttnProjections,
    RegionMasks,
    _mask_tensor,
    cross_attn,
    mixer,
    spatial_cross_attn,
    temporal_cross_attn,
)
from .errors import DimMismatch, ShapeMismatch
from .tensor import Tensor

DEFAULT_FACE_DIM = 16
ARCFACE_DIM = 512


@dataclass
class IdProjection:
    """Affine map from face-embedding space to the hidden dimension.

    With ``hidden`` set, a second affine layer with a tanh in between is
    used instead (``A @ w1 + b1 -> tanh -> @ weights + bias``).
    """

    weights: Tensor
    bias: Tensor
    w1: Tensor | None = None
    b1: Tensor | None = None

    @classmethod
    def init(cls, d_face: int, d: int, rng: np.random.Generator, two_layer: bool = False,
             dtype="f64") -> IdProjection:
        if not two_layer:
            w = rng.standard_normal((d_face, d)) / np.sqrt(d_face)
            return cls(Tensor(w, True, dtype), Tensor(np.zeros(d), True, dtype))
        w1 = rng.standard_normal((d_face, d)) / np.sqrt(d_face)
        w2 = rng.standard_normal((d, d)) / np.sqrt(d)
        return cls(Tensor(w2, True, dtype), Tensor(np.zeros(d), True, dtype),
                   Tensor(w1, True, dtype), Tensor(np.zeros(d), True, dtype))

    @property
    def in_dim(self) -> int:
        return (self.w1 if self.w1 is not None else self.weights).shape[0]

    def parameters(self) -> dict[str, Tensor]:
        out = {"weights": self.weights, "bias": self.bias}
        if self.w1 is not None:
            out.update(w1=self.w1, b1=self.b1)
        return out


def project_embedding(A: Tensor, W: IdProjection) -> Tensor:
    """``A_emb = W(A_face)`` for embedding rows ``A`` of shape ``(e, d_face)``."""
    if A.ndim != 2 or A.shape[1] != W.in_dim:
        raise DimMismatch(f"face embedding {A.shape} does not match projection input {W.in_dim}")
    if W.w1 is not None:
        A = T.tanh(A @ W.w1 + W.b1)
    return A @ W.weights + W.bias


def id_attend(Vi: Tensor, A_emb: Tensor, masks: RegionMasks, alpha: float = 0.5,
              proj: AttnProjections | None = None) -> Tensor:
    """Spatial and temporal attention to ``A_emb``, mixed with ``alpha``, kept on the face only.

    ``A_emb`` is either ``(e, d)`` shared across the batch or ``(b, e, d)``
    with one embedding set per sample.
    """
    if A_emb.shape[-1] != Vi.shape[-1]:
        raise DimMismatch(f"embedding dim {A_emb.shape[-1]} != hidden channels {Vi.shape[-1]}")
    if A_emb.ndim == 2:
        Vs = spatial_cross_attn(Vi, A_emb, proj)
        Vt = temporal_cross_attn(Vi, A_emb, proj)
    elif A_emb.ndim == 3 and A_emb.shape[0] == Vi.shape[0]:
        Vs, Vt = _per_sample_attend(Vi, A_emb, proj)
    else:
        raise ShapeMismatch(f"embedding shape {A_emb.shape} incompatible with batch {Vi.shape[0]}")
    return mixer(Vs, Vt, alpha) * _mask_tensor(masks.face, Vi)


def _per_sample_attend(Vi, A_emb, proj):
    # Cross-attention treats every query independently, so the spatial and
    # temporal groupings give the same per-token result; one batched call
    # with the sample's own keys covers both.
    b, f, h, w, c = Vi.shape
    out = cross_attn(Vi.reshape(b, f * h * w, c), A_emb, A_emb, proj).reshape(b, f, h, w, c)
    return out, out


def fuse_outputs(V_att: Tensor, V_face: Tensor) -> Tensor:
    """Final block output ``V_att + V_face``."""
    if V_att.shape != V_face.shape:
        raise ShapeMismatch(f"cannot fuse {V_att.shape} and {V_face.shape}")
    return V_att + V_face
