"""
Region-aware interaction latents for hand-face video diffusion, at desk scale.

The package bundles a small numpy autodiff core, the interaction block
(soft quantization against learnable latents, spatial/temporal cross
attention, mixing, region masking), the identity path, the amplified
diffusion and orthogonality losses, and a toy latent-video trainer on
synthetic clips.
"""

from .attention import (
    MixerConfig,
    RegionMasks,
    apply_region_mask,
    cross_attn,
    mixer,
    region_attention_block,
    spatial_cross_attn,
    temporal_cross_attn,
)
from .config import TrainConfig
from .id_preserver import IdProjection, fuse_outputs, id_attend, project_embedding
from .latents import InteractionLatents, combined_ortho_loss, init_latents, orthogonality_loss
from .losses import LatentPair, LossConfig, amplification_weights, diffusion_loss, total_loss
from .softquant import QuantConfig, soft_quantize
from .tensor import Tensor, backward, finite_diff_check

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "finite_diff_check",
    "InteractionLatents", "init_latents", "orthogonality_loss", "combined_ortho_loss",
    "QuantConfig", "soft_quantize",
    "RegionMasks", "MixerConfig", "cross_attn", "spatial_cross_attn", "temporal_cross_attn",
    "mixer", "apply_region_mask", "region_attention_block",
    "IdProjection", "project_embedding", "id_attend", "fuse_outputs",
    "LossConfig", "LatentPair", "amplification_weights", "diffusion_loss", "total_loss",
    "TrainConfig",
]
