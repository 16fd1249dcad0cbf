"""
Finite-difference gradient suite.

Every target builds a small random f64 problem, reduces it to a scalar
with a fixed random projection (so no gradient is trivially constant)
and compares reverse-mode gradients with central differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .attention import (
    MixerConfig,
    RegionMasks,
    apply_region_mask,
    mixer,
    region_attention_block,
    spatial_cross_attn,
    temporal_cross_attn,
)
from .config import TrainConfig
from .id_preserver import IdProjection, id_attend, project_embedding
from .latents import InteractionLatents, orthogonality_loss
from .losses import LatentPair, LossConfig, diffusion_loss
from .softquant import QuantConfig, soft_quantize
from .tensor import Tensor, finite_diff_check

TOLERANCE = 1e-4
EPS = 1e-4


@dataclass
class Target:
    name: str
    group: str
    run: Callable[[np.random.Generator], float]


def _proj(rng, shape):
    return Tensor(rng.standard_normal(shape))


def _scalar(out: Tensor, weights: Tensor) -> Tensor:
    return T.reduce_sum(out * weights)


def _masks(rng, shape):
    hand = (rng.random(shape) < 0.6).astype(float)
    face = (rng.random(shape) < 0.6).astype(float)
    return RegionMasks(hand, face)


def _check(rng, fn, *shapes, scale=1.0):
    xs = [rng.standard_normal(s) * scale for s in shapes]
    return finite_diff_check(fn, xs if len(xs) > 1 else xs[0], EPS)


def _matmul(rng):
    P = _proj(rng, (2, 3, 5))
    return _check(rng, lambda a, b: _scalar(a @ b, P), (2, 3, 4), (4, 5))


def _softmax(rng):
    P = _proj(rng, (3, 6))
    return _check(rng, lambda x: _scalar(T.softmax(x, axis=1), P), (3, 6))


def _reductions(rng):
    P = _proj(rng, (3, 1))
    return max(_check(rng, lambda x: _scalar(T.reduce_sum(x, 1, True), P), (3, 4)),
               _check(rng, lambda x: T.mean(x * x), (3, 4)))


def _elementwise(rng):
    P = _proj(rng, (3, 4))
    return max(_check(rng, lambda a, b: _scalar(T.elementwise(a, b, k), P), (3, 4), (4,))
               for k in ("add", "sub", "mul"))


def _shape_ops(rng):
    P = _proj(rng, (4, 3, 2))
    return _check(rng, lambda x: _scalar(x.reshape(2, 3, 4).transpose(2, 1, 0), P), (6, 4))


def _power_tanh(rng):
    P = _proj(rng, (3, 4))
    return _check(rng, lambda x: _scalar(T.tanh(x) + T.power(x * x + 1.0, -0.5), P), (3, 4))


def _softquant(rng):
    shape = (1, 2, 2, 2, 4)
    P = _proj(rng, shape)
    return _check(rng, lambda V, L: _scalar(soft_quantize(V, L, QuantConfig(1.0)), P), shape, (5, 4))


def _spatial(rng):
    shape = (1, 2, 2, 2, 4)
    P = _proj(rng, shape)
    return _check(rng, lambda V, L: _scalar(spatial_cross_attn(V, L), P), shape, (3, 4))


def _temporal(rng):
    shape = (1, 3, 2, 2, 4)
    P = _proj(rng, shape)
    return _check(rng, lambda V, L: _scalar(temporal_cross_attn(V, L), P), shape, (3, 4))


def _mixer(rng):
    shape = (1, 2, 2, 2, 3)
    P = _proj(rng, shape)
    return _check(rng, lambda a, b: _scalar(mixer(a, b, 0.3), P), shape, shape)


def _masking(rng):
    shape = (1, 2, 3, 3, 2)
    P = _proj(rng, shape)
    masks = _masks(rng, shape[:-1] + (1,))
    return max(_check(rng, lambda V: _scalar(apply_region_mask(V, masks, mode), P), shape)
               for mode in ("product", "union"))


def _region_block(rng):
    shape = (2, 2, 4, 4, 8)
    P = _proj(rng, shape)
    masks = _masks(rng, shape[:-1] + (1,))

    def f(V, Ls, Lt):
        return _scalar(region_attention_block(V, InteractionLatents(Ls, Lt), masks,
                                              QuantConfig(1.0), MixerConfig(0.5, "union")), P)
    return _check(rng, f, shape, (3, 8), (4, 8))


def _id_path(rng):
    shape = (1, 2, 2, 2, 4)
    P = _proj(rng, shape)
    masks = _masks(rng, shape[:-1] + (1,))

    def f(V, A, W, bias):
        emb = project_embedding(A, IdProjection(W, bias))
        return _scalar(id_attend(V, emb, masks, 0.5), P)
    return _check(rng, f, shape, (2, 6), (6, 4), (4,))


def _diff_loss(rng):
    shape = (1, 2, 3, 3, 2)
    masks = _masks(rng, shape[:-1] + (1,))
    z = Tensor(rng.standard_normal(shape))
    return max(_check(rng, lambda zh: diffusion_loss(LatentPair(z, zh, masks), LossConfig(weighted_mean=wm)),
                      shape) for wm in (False, True))


def _ortho_loss(rng):
    return max(_check(rng, lambda L: orthogonality_loss(L, normalize=nz), (5, 4)) for nz in (False, True))


def _end_to_end(rng):
    from .pipeline import Batch, ToyDenoiser, compute_losses
    from .synthdata import ClipDims, generate_clip

    cfg = TrainConfig(n=3, m=3, d=4, b=1, f=3, h=8, w=8, c=2, d_face=3, T=10, eval_t=5,
                      seed=int(rng.integers(1 << 30)), latent_init_scale=0.5, mask_combine="union")
    clip = generate_clip("LH-NP", int(rng.integers(1 << 30)), ClipDims(f=3, h=8, w=8, c=2, d_face=3))
    batch = Batch.from_clips([clip])
    t = np.array([int(rng.integers(cfg.T))])
    eps = rng.standard_normal(batch.z0.shape)
    model = ToyDenoiser(cfg)
    model.params["w_skip"] = rng.standard_normal(model.params["w_skip"].shape) * 0.3
    model.params["w_out"] = rng.standard_normal(model.params["w_out"].shape) * 0.5
    names = list(model.params)

    def f(*tensors):
        total, *_ = compute_losses(model, batch, t, eps, dict(zip(names, tensors)))
        return total
    return finite_diff_check(f, [model.params[k] for k in names], EPS)


TARGETS = [
    Target("matmul", "tensor_core", _matmul),
    Target("softmax", "tensor_core", _softmax),
    Target("reductions", "tensor_core", _reductions),
    Target("elementwise", "tensor_core", _elementwise),
    Target("reshape_transpose", "tensor_core", _shape_ops),
    Target("tanh_power", "tensor_core", _power_tanh),
    Target("soft_quantize", "softquant", _softquant),
    Target("spatial_cross_attn", "region_attention", _spatial),
    Target("temporal_cross_attn", "region_attention", _temporal),
    Target("mixer", "region_attention", _mixer),
    Target("region_mask", "region_attention", _masking),
    Target("region_attention_block", "region_attention", _region_block),
    Target("id_path", "id_preserver", _id_path),
    Target("diffusion_loss", "losses", _diff_loss),
    Target("orthogonality_loss", "latents", _ortho_loss),
    Target("end_to_end_total_loss", "toy_pipeline", _end_to_end),
]
GROUP_ALIASES = {"softquant": "softquant", "quantize": "softquant", "attention": "region_attention",
                 "id": "id_preserver", "latents": "latents", "losses": "losses",
                 "tensor": "tensor_core", "pipeline": "toy_pipeline", "end_to_end": "toy_pipeline"}


def select(only: list[str] | None = None) -> list[Target]:
    if not only:
        return list(TARGETS)
    keys = {GROUP_ALIASES.get(k, k) for k in only}
    chosen = [t for t in TARGETS if t.name in keys or t.group in keys]
    if not chosen:
        raise KeyError(f"no gradient targets match {only}")
    return chosen


def run_suite(only: list[str] | None = None, seed: int = 0, tol: float = TOLERANCE) -> list[dict]:
    """Run the selected targets; one result dict per target."""
    results = []
    for target in select(only):
        rng = np.random.default_rng([seed, TARGETS.index(target)])
        t0 = time.perf_counter()
        err = float(target.run(rng))
        results.append({"name": target.name, "group": target.group, "max_rel_error": err,
                        "passed": err < tol, "seconds": time.perf_counter() - t0})
    return results
