"""
Soft quantization against a latent set
======================================

Hidden vectors are pulled toward a small set of latent rows. The
temperature decides how hard that pull is.
"""

# %%
# A handful of 2-D latents and some points to quantize.
import numpy as np

from interlat import QuantConfig, Tensor, soft_quantize
from interlat.softquant import soft_assign

rng = np.random.default_rng(0)
latents = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0], [0.5, -0.8]])
points = rng.standard_normal((1, 1, 1, 5, 2))

# %%
# At a tiny temperature each point snaps onto its nearest latent.
hard = soft_quantize(Tensor(points), Tensor(latents), QuantConfig(1e-6)).data
print("tau=1e-6\n", hard.reshape(-1, 2).round(4))

# %%
# At a huge temperature every point collapses onto the latent mean.
flat = soft_quantize(Tensor(points), Tensor(latents), QuantConfig(1e9)).data
print("tau=1e9\n", flat.reshape(-1, 2).round(4), "\nlatent mean", latents.mean(0))

# %%
# In between, the assignment weights spread out smoothly as tau grows.
for tau in (0.1, 1.0, 10.0):
    w = soft_assign(Tensor(points.reshape(-1, 2)), Tensor(latents), tau).data
    entropy = -(w * np.log(w + 1e-300)).sum(1).mean()
    print(f"tau={tau:>5}: mean assignment entropy {entropy:.3f} (max {np.log(4):.3f})")

# %%
# The operation is differentiable in both the points and the latents.
L = Tensor(latents, requires_grad=True)
loss = (soft_quantize(Tensor(points), L, 1.0) * Tensor(points)).sum()
loss.backward()
print("d loss / d latents\n", L.grad.data.round(4))
