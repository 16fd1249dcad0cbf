"""
The region attention block on a synthetic clip
==============================================

Run one clip through the interaction block and the identity path, and
see that nothing outside the hand/face region moves.
"""

# %%
import numpy as np

from interlat import (
    IdProjection,
    MixerConfig,
    RegionMasks,
    Tensor,
    fuse_outputs,
    id_attend,
    init_latents,
    project_embedding,
    region_attention_block,
)
from interlat.synthdata import generate_clip

clip = generate_clip("RH-CH", seed=3)
print("class", clip.interaction_class, "frames", clip.frames.shape, "contact at", clip.contact_frames)

# %%
# Lift the 4-channel clip into an 8-channel hidden space with a fixed map.
rng = np.random.default_rng(1)
lift = rng.standard_normal((clip.frames.shape[-1], 8)) / 2
V = Tensor(np.tanh(clip.frames @ lift)[None])
masks = RegionMasks(clip.hand_mask[None], clip.face_mask[None])
lat = init_latents(16, 16, 8, seed=2, scale=0.5)

# %%
# Product masking only opens the block where hand and face overlap.
for mode in ("product", "union"):
    out = region_attention_block(V, lat, masks, mix=MixerConfig(0.5, mode)).data
    changed = np.any(out != V.data, axis=-1)
    print(f"{mode:>8}: {changed.sum():3d} of {changed.size} sites changed, "
          f"{int(masks.combined(mode).sum())} inside the mask")

# %%
# The identity path adds a face-only term driven by a projected embedding.
proj = IdProjection.init(clip.identity.size, 8, rng)
emb = project_embedding(Tensor(clip.identity[None]), proj)
v_att = region_attention_block(V, lat, masks, mix=MixerConfig(0.5, "union"))
v_out = fuse_outputs(v_att, id_attend(V, emb, masks))
off_face = np.broadcast_to(masks.face == 0, V.shape)
print("identical off the face:", np.array_equal(v_out.data[off_face], v_att.data[off_face]))
