import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interlat.attention import (
    AttnProjections,
    MixerConfig,
    RegionMasks,
    apply_region_mask,
    cross_attn,
    mixer,
    region_attention_block,
    region_latent,
    spatial_cross_attn,
    temporal_cross_attn,
)
from interlat.errors import DimMismatch, ShapeMismatch
from interlat.latents import InteractionLatents
from interlat.softquant import QuantConfig, soft_quantize
from interlat.tensor import Tensor


def attn_oracle(q, L):
    """Row-by-row attention of query vectors against L (keys == values)."""
    out = np.empty_like(q)
    for i, row in enumerate(q):
        s = L @ row / np.sqrt(L.shape[1])
        p = np.exp(s - s.max())
        out[i] = (p / p.sum()) @ L
    return out


def lat(rng, n, m, d, scale=1.0):
    return InteractionLatents(Tensor(rng.standard_normal((n, d)) * scale),
                              Tensor(rng.standard_normal((m, d)) * scale))


def rand_masks(rng, shape, p=0.5):
    return RegionMasks((rng.random(shape) < p) * 1.0, (rng.random(shape) < p) * 1.0)


# -- cross attention ----------------------------------------------------------------

def test_single_key_returns_its_value():
    Q = Tensor(np.random.default_rng(0).standard_normal((3, 4)))
    out = cross_attn(Q, Tensor(np.ones((1, 4))), Tensor([[7.0, 8.0]]))
    np.testing.assert_allclose(out.data, [[7.0, 8.0]] * 3)


def test_spatial_attention_slice_oracle():
    rng = np.random.default_rng(1)
    V, L = rng.standard_normal((2, 3, 2, 2, 4)), rng.standard_normal((5, 4))
    out = spatial_cross_attn(Tensor(V), Tensor(L)).data
    for bi in range(2):
        for fi in range(3):
            q = V[bi, fi].reshape(-1, 4)
            np.testing.assert_allclose(out[bi, fi].reshape(-1, 4), attn_oracle(q, L), atol=1e-12)


def test_temporal_attention_slice_oracle():
    rng = np.random.default_rng(2)
    V, L = rng.standard_normal((2, 3, 2, 2, 4)), rng.standard_normal((5, 4))
    out = temporal_cross_attn(Tensor(V), Tensor(L)).data
    for bi in range(2):
        for y in range(2):
            for x in range(2):
                np.testing.assert_allclose(out[bi, :, y, x], attn_oracle(V[bi, :, y, x], L), atol=1e-12)


def test_temporal_with_one_frame():
    rng = np.random.default_rng(3)
    V, L = rng.standard_normal((1, 1, 2, 2, 3)), rng.standard_normal((4, 3))
    out = temporal_cross_attn(Tensor(V), Tensor(L)).data
    np.testing.assert_allclose(out[0, 0].reshape(-1, 3), attn_oracle(V[0, 0].reshape(-1, 3), L), atol=1e-12)


def test_spatial_attention_rows_in_latent_box():
    rng = np.random.default_rng(4)
    L = rng.standard_normal((6, 3))
    out = spatial_cross_attn(Tensor(rng.standard_normal((1, 2, 3, 3, 3)) * 10), Tensor(L)).data
    assert np.all(out >= L.min(0) - 1e-12) and np.all(out <= L.max(0) + 1e-12)


def test_projections_change_the_result():
    rng = np.random.default_rng(5)
    V, L = Tensor(rng.standard_normal((1, 2, 2, 2, 4))), Tensor(rng.standard_normal((3, 4)))
    proj = AttnProjections.init(4, rng)
    assert not np.allclose(spatial_cross_attn(V, L).data, spatial_cross_attn(V, L, proj).data)


def test_attention_errors():
    with pytest.raises(DimMismatch):
        spatial_cross_attn(Tensor(np.ones((1, 1, 2, 2, 3))), Tensor(np.ones((2, 4))))
    with pytest.raises(ShapeMismatch):
        temporal_cross_attn(Tensor(np.ones((2, 2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeMismatch):
        cross_attn(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 3))), Tensor(np.ones((5, 3))))


# -- mixer ----------------------------------------------------------------------------

def test_mixer_endpoints_and_midpoint():
    rng = np.random.default_rng(6)
    a, b = Tensor(rng.standard_normal((2, 3))), Tensor(rng.standard_normal((2, 3)))
    np.testing.assert_array_equal(mixer(a, b, 1.0).data, a.data)
    np.testing.assert_array_equal(mixer(a, b, 0.0).data, b.data)
    np.testing.assert_allclose(mixer(a, b, 0.5).data, (a.data + b.data) / 2, atol=1e-15)
    np.testing.assert_allclose(mixer(a, a, 0.3).data, a.data, atol=1e-15)


def test_mixer_errors():
    with pytest.raises(ValueError):
        mixer(Tensor(np.ones(2)), Tensor(np.ones(2)), 1.5)
    with pytest.raises(ShapeMismatch):
        mixer(Tensor(np.ones(2)), Tensor(np.ones(3)), 0.5)
    with pytest.raises(ValueError):
        MixerConfig(alpha=-0.1)
    with pytest.raises(ValueError):
        MixerConfig(mask_combine="xor")


# -- masks ---------------------------------------------------------------------------------

def test_mask_modes():
    Vl = Tensor(np.ones((1, 1, 1, 4, 2)))
    hand = np.array([1, 1, 0, 0.0]).reshape(1, 1, 1, 4, 1)
    face = np.array([1, 0, 1, 0.0]).reshape(1, 1, 1, 4, 1)
    m = RegionMasks(hand, face)
    np.testing.assert_array_equal(apply_region_mask(Vl, m, "product").data[..., 0].ravel(), [1, 0, 0, 0])
    np.testing.assert_array_equal(apply_region_mask(Vl, m, "union").data[..., 0].ravel(), [1, 1, 1, 0])


def test_masks_validate():
    with pytest.raises(ValueError):
        RegionMasks(np.full((2, 2), 0.5), np.zeros((2, 2)))
    with pytest.raises(ShapeMismatch):
        RegionMasks(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ShapeMismatch):
        apply_region_mask(Tensor(np.ones((1, 2, 2, 2, 3))), RegionMasks.ones((1, 3, 2, 2, 1)))


# -- the block ------------------------------------------------------------------------------

def test_all_zero_masks_give_identity():
    rng = np.random.default_rng(7)
    V = rng.standard_normal((2, 2, 3, 3, 4))
    out = region_attention_block(Tensor(V), lat(rng, 5, 6, 4), RegionMasks.zeros((2, 2, 3, 3, 1))).data
    assert out.tobytes() == V.tobytes()


def test_all_one_masks_equal_unmasked_composition():
    rng = np.random.default_rng(8)
    V, latents = Tensor(rng.standard_normal((1, 3, 2, 2, 4))), lat(rng, 3, 4, 4)
    out = region_attention_block(V, latents, RegionMasks.ones((1, 3, 2, 2, 1)), QuantConfig(1.0),
                                 MixerConfig(0.5)).data
    expected = V.data + region_latent(V, latents, QuantConfig(1.0), MixerConfig(0.5)).data
    np.testing.assert_array_equal(out, expected)


def test_block_matches_compositional_oracle():
    rng = np.random.default_rng(9)
    V, latents = rng.standard_normal((1, 2, 2, 2, 3)), lat(rng, 4, 5, 3)
    masks = rand_masks(rng, (1, 2, 2, 2, 1), 0.7)
    Ls, Lt = latents.spatial.data, latents.temporal.data
    qs = soft_quantize(Tensor(V), latents.spatial, 1.0).data
    qt = soft_quantize(Tensor(V), latents.temporal, 1.0).data
    hs = np.empty_like(V)
    ht = np.empty_like(V)
    for fi in range(2):
        hs[0, fi] = attn_oracle(qs[0, fi].reshape(-1, 3), Ls).reshape(2, 2, 3)
    for y in range(2):
        for x in range(2):
            ht[0, :, y, x] = attn_oracle(qt[0, :, y, x], Lt)
    mixed = 0.25 * hs + 0.75 * ht
    expected = V + mixed * masks.hand * masks.face
    out = region_attention_block(Tensor(V), latents, masks, QuantConfig(1.0), MixerConfig(0.25)).data
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_no_quantize_flag_feeds_raw_states():
    rng = np.random.default_rng(10)
    V, latents = Tensor(rng.standard_normal((1, 2, 2, 2, 3))), lat(rng, 4, 4, 3)
    raw = region_latent(V, latents, quantize=False, mix=MixerConfig(1.0)).data
    np.testing.assert_allclose(raw, spatial_cross_attn(V, latents.spatial).data, atol=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 2), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4),
       st.sampled_from(["product", "union"]), st.floats(0, 1), st.integers(0, 2**31 - 1))
def test_outside_mask_is_exact_identity(b, f, h, w, c, mode, alpha, seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((b, f, h, w, c))
    masks = rand_masks(rng, (b, f, h, w, 1))
    out = region_attention_block(Tensor(V), lat(rng, 3, 2, c), masks, mix=MixerConfig(alpha, mode)).data
    off = np.broadcast_to(masks.combined(mode) == 0, V.shape)
    assert np.array_equal(out[off], V[off])
