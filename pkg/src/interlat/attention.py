"""
Region attention block.

Hidden states are ``(b, f, h, w, c)`` tensors. The block quantizes them
against the spatial and temporal latent sets, lets the quantized states
attend to those latents along space and along time, blends the two
results, keeps only the hand/face region and adds the result back onto
the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimMismatch, ShapeMismatch
from .latents import InteractionLatents
from .softquant import QuantConfig, soft_quantize
from .tensor import Tensor

DEFAULT_ALPHA = 0.5
MASK_MODES = ("product", "union")


@dataclass(frozen=True)
class RegionMasks:
    """Binary hand and face masks shaped ``(b, f, h, w, 1)``."""

    hand: np.ndarray
    face: np.ndarray

    def __post_init__(self):
        for name in ("hand", "face"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all((arr == 0) | (arr == 1)):
                raise ValueError(f"{name} mask must be binary")
            object.__setattr__(self, name, arr)
        if self.hand.shape != self.face.shape:
            raise ShapeMismatch(f"hand mask {self.hand.shape} != face mask {self.face.shape}")

    @classmethod
    def ones(cls, shape):
        return cls(np.ones(shape), np.ones(shape))

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    def combined(self, mode: str = "product") -> np.ndarray:
        if mode == "product":
            return self.hand * self.face
        if mode == "union":
            return np.maximum(self.hand, self.face)
        raise ValueError(f"unknown mask mode {mode!r}")


@dataclass(frozen=True)
class MixerConfig:
    alpha: float = DEFAULT_ALPHA
    mask_combine: str = "product"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.mask_combine not in MASK_MODES:
            raise ValueError(f"mask_combine must be one of {MASK_MODES}")


@dataclass
class AttnProjections:
    """Optional learned query/key/value maps, each ``(d, d)``."""

    wq: Tensor
    wk: Tensor
    wv: Tensor

    @classmethod
    def init(cls, d, rng, scale=None, dtype="f64"):
        scale = 1.0 / np.sqrt(d) if scale is None else scale
        return cls(*(Tensor(np.eye(d) + rng.standard_normal((d, d)) * scale, True, dtype)
                     for _ in range(3)))


def _check_hidden(V: Tensor, d: int) -> None:
    if V.ndim != 5:
        raise ShapeMismatch(f"hidden states must be (b, f, h, w, c), got {V.shape}")
    if V.shape[-1] != d:
        raise DimMismatch(f"hidden channels {V.shape[-1]} != latent dim {d}")


def cross_attn(Q: Tensor, K: Tensor, V: Tensor, proj: AttnProjections | None = None) -> Tensor:
    """``softmax(Q K^T / sqrt(d)) V`` over the last two axes (leading axes batch)."""
    if Q.shape[-1] != K.shape[-1]:
        raise DimMismatch(f"query dim {Q.shape[-1]} != key dim {K.shape[-1]}")
    if K.shape[-2] != V.shape[-2]:
        raise ShapeMismatch(f"{K.shape[-2]} keys but {V.shape[-2]} values")
    if proj is not None:
        Q, K, V = Q @ proj.wq, K @ proj.wk, V @ proj.wv
    d = K.shape[-1]
    scores = (Q @ K.T) * (1.0 / np.sqrt(d))
    return T.softmax(scores, axis=-1) @ V


def spatial_cross_attn(Vq: Tensor, Ls: Tensor, proj: AttnProjections | None = None) -> Tensor:
    """Attend every spatial token of each (batch, frame) slice to ``Ls``."""
    _check_hidden(Vq, Ls.shape[-1])
    b, f, h, w, c = Vq.shape
    out = cross_attn(Vq.reshape(b * f, h * w, c), Ls, Ls, proj)
    return out.reshape(b, f, h, w, c)


def temporal_cross_attn(Vq: Tensor, Lt: Tensor, proj: AttnProjections | None = None) -> Tensor:
    """Attend the frame sequence at each (batch, pixel) site to ``Lt``."""
    _check_hidden(Vq, Lt.shape[-1])
    b, f, h, w, c = Vq.shape
    seq = Vq.transpose(0, 2, 3, 1, 4).reshape(b * h * w, f, c)
    out = cross_attn(seq, Lt, Lt, proj)
    return out.reshape(b, h, w, f, c).transpose(0, 3, 1, 2, 4)


def mixer(Vs: Tensor, Vt: Tensor, alpha: float = DEFAULT_ALPHA) -> Tensor:
    """``alpha * Vs + (1 - alpha) * Vt``."""
    if Vs.shape != Vt.shape:
        raise ShapeMismatch(f"mixer inputs differ: {Vs.shape} vs {Vt.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return Vs * alpha + Vt * (1.0 - alpha)


def _mask_tensor(mask: np.ndarray, like: Tensor) -> Tensor:
    try:
        np.broadcast_shapes(mask.shape, like.shape)
    except ValueError:
        raise ShapeMismatch(f"mask {mask.shape} does not broadcast to {like.shape}") from None
    return Tensor(mask, dtype=like.dtype)


def apply_region_mask(Vl: Tensor, masks: RegionMasks, combine: str = "product") -> Tensor:
    """Zero everything outside the hand/face region.

    ``product`` multiplies by the hand mask and then the face mask, so only
    their intersection survives. ``union`` keeps either region.
    """
    if combine == "product":
        return Vl * _mask_tensor(masks.hand, Vl) * _mask_tensor(masks.face, Vl)
    return Vl * _mask_tensor(masks.combined(combine), Vl)


def region_latent(Vi: Tensor, lat: InteractionLatents, quant: QuantConfig = QuantConfig(),
                  mix: MixerConfig = MixerConfig(), quantize: bool = True,
                  proj: AttnProjections | None = None) -> Tensor:
    """Quantize, cross-attend in space and time and mix; no masking or residual."""
    _check_hidden(Vi, lat.d)
    if quantize:
        Vs = soft_quantize(Vi, lat.spatial, quant)
        Vt = soft_quantize(Vi, lat.temporal, quant)
    else:
        Vs = Vt = Vi
    hat_s = spatial_cross_attn(Vs, lat.spatial, proj)
    hat_t = temporal_cross_attn(Vt, lat.temporal, proj)
    return mixer(hat_s, hat_t, mix.alpha)


def region_attention_block(Vi: Tensor, lat: InteractionLatents, masks: RegionMasks,
                           quant: QuantConfig = QuantConfig(), mix: MixerConfig = MixerConfig(),
                           quantize: bool = True, proj: AttnProjections | None = None) -> Tensor:
    """Full block: ``Vi + mask(mixer(spatial_attn(q_s(Vi)), temporal_attn(q_t(Vi))))``."""
    Vl = region_latent(Vi, lat, quant, mix, quantize, proj)
    return Vi + apply_region_mask(Vl, masks, mix.mask_combine)
