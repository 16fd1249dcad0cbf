import numpy as np
import pytest

from interlat.attention import RegionMasks, spatial_cross_attn, temporal_cross_attn
from interlat.errors import DimMismatch, ShapeMismatch
from interlat.id_preserver import (
    ARCFACE_DIM,
    IdProjection,
    fuse_outputs,
    id_attend,
    project_embedding,
)
from interlat.tensor import Tensor, finite_diff_check


def test_projection_identity_weights():
    A = np.random.default_rng(0).standard_normal((3, 4))
    proj = IdProjection(Tensor(np.eye(4)), Tensor(np.zeros(4)))
    np.testing.assert_array_equal(project_embedding(Tensor(A), proj).data, A)


def test_projection_is_affine():
    rng = np.random.default_rng(1)
    A, W, b = rng.standard_normal((2, 5)), rng.standard_normal((5, 3)), rng.standard_normal(3)
    out = project_embedding(Tensor(A), IdProjection(Tensor(W), Tensor(b))).data
    np.testing.assert_allclose(out, A @ W + b, atol=1e-12)


def test_two_layer_projection():
    rng = np.random.default_rng(2)
    proj = IdProjection.init(6, 4, rng, two_layer=True)
    A = rng.standard_normal((2, 6))
    hidden = np.tanh(A @ proj.w1.data + proj.b1.data)
    np.testing.assert_allclose(project_embedding(Tensor(A), proj).data,
                               hidden @ proj.weights.data + proj.bias.data, atol=1e-12)
    assert set(proj.parameters()) == {"weights", "bias", "w1", "b1"}


def test_arcface_sized_input():
    proj = IdProjection.init(ARCFACE_DIM, 8, np.random.default_rng(3))
    out = project_embedding(Tensor(np.ones((1, ARCFACE_DIM))), proj)
    assert out.shape == (1, 8)


def test_projection_dim_mismatch():
    proj = IdProjection.init(5, 3, np.random.default_rng(4))
    with pytest.raises(DimMismatch):
        project_embedding(Tensor(np.ones((1, 4))), proj)


def test_face_mask_zero_gives_zero():
    rng = np.random.default_rng(5)
    V = Tensor(rng.standard_normal((1, 2, 2, 2, 3)))
    masks = RegionMasks(np.ones((1, 2, 2, 2, 1)), np.zeros((1, 2, 2, 2, 1)))
    out = id_attend(V, Tensor(rng.standard_normal((2, 3))), masks)
    assert not out.data.any()


def test_id_attend_composition():
    rng = np.random.default_rng(6)
    V, E = Tensor(rng.standard_normal((2, 3, 2, 2, 4))), Tensor(rng.standard_normal((3, 4)))
    face = (rng.random((2, 3, 2, 2, 1)) < 0.5) * 1.0
    masks = RegionMasks(np.zeros_like(face), face)
    out = id_attend(V, E, masks, alpha=0.3).data
    expected = (0.3 * spatial_cross_attn(V, E).data + 0.7 * temporal_cross_attn(V, E).data) * face
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_per_sample_embeddings_match_individual_calls():
    rng = np.random.default_rng(7)
    V = rng.standard_normal((2, 2, 2, 2, 3))
    E = rng.standard_normal((2, 1, 3))
    masks = RegionMasks.ones((2, 2, 2, 2, 1))
    batched = id_attend(Tensor(V), Tensor(E), masks).data
    for i in range(2):
        single = id_attend(Tensor(V[i:i + 1]), Tensor(E[i]), RegionMasks.ones((1, 2, 2, 2, 1))).data
        np.testing.assert_allclose(batched[i:i + 1], single, atol=1e-12)


def test_id_attend_errors():
    V = Tensor(np.ones((2, 1, 2, 2, 3)))
    with pytest.raises(DimMismatch):
        id_attend(V, Tensor(np.ones((1, 4))), RegionMasks.ones((2, 1, 2, 2, 1)))
    with pytest.raises(ShapeMismatch):
        id_attend(V, Tensor(np.ones((3, 1, 3))), RegionMasks.ones((2, 1, 2, 2, 1)))


def test_fuse_is_sum():
    a, b = Tensor(np.ones((1, 2))), Tensor(np.full((1, 2), 2.0))
    np.testing.assert_array_equal(fuse_outputs(a, b).data, [[3.0, 3.0]])
    with pytest.raises(ShapeMismatch):
        fuse_outputs(a, Tensor(np.ones(3)))


def test_id_path_gradients():
    rng = np.random.default_rng(8)
    masks = RegionMasks(np.ones((1, 2, 2, 2, 1)), (rng.random((1, 2, 2, 2, 1)) < 0.6) * 1.0)
    P = Tensor(rng.standard_normal((1, 2, 2, 2, 3)))

    def f(V, A, W, b):
        return (id_attend(V, project_embedding(A, IdProjection(W, b)), masks, 0.4) * P).sum()
    xs = [rng.standard_normal(s) for s in ((1, 2, 2, 2, 3), (2, 5), (5, 3), (3,))]
    assert finite_diff_check(f, xs, 1e-4) < 1e-4
