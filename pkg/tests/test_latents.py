import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interlat import tensor as T
from interlat.errors import InvalidDimension, TooFewLatents
from interlat.latents import (
    InteractionLatents,
    combined_ortho_loss,
    init_latents,
    orthogonality_loss,
)
from interlat.tensor import Tensor, finite_diff_check


def pairwise_oracle(L):
    """Mean of squared dot products over ordered row pairs i != j."""
    k = L.shape[0]
    total, count = 0.0, 0
    for i in range(k):
        for j in range(k):
            if i != j:
                total += float(np.dot(L[i], L[j])) ** 2
                count += 1
    return total / count


def test_init_is_deterministic():
    a = init_latents(4, 5, 3, seed=9, scale=0.1)
    b = init_latents(4, 5, 3, seed=9, scale=0.1)
    assert a.spatial.data.tobytes() == b.spatial.data.tobytes()
    assert a.temporal.data.tobytes() == b.temporal.data.tobytes()
    assert a.spatial.requires_grad


def test_init_zero_scale():
    lat = init_latents(3, 3, 2, seed=0, scale=0.0)
    assert not lat.spatial.data.any() and not lat.temporal.data.any()


def test_init_full_scale_shapes():
    lat = init_latents(512, 512, 512, seed=0)
    assert lat.spatial.shape == (512, 512) and lat.temporal.shape == (512, 512)
    assert (lat.n, lat.m, lat.d) == (512, 512, 512)


def test_init_default_scale_is_002():
    lat = init_latents(200, 200, 50, seed=1)
    assert abs(lat.spatial.data.std() - 0.02) < 0.001


def test_init_rejects_bad_dims():
    with pytest.raises(InvalidDimension):
        init_latents(0, 2, 2)
    with pytest.raises(InvalidDimension):
        InteractionLatents(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))))


def test_ortho_orthogonal_rows_is_zero():
    assert orthogonality_loss(Tensor([[1.0, 0.0], [0.0, 1.0]])).item() == 0.0


def test_ortho_duplicate_rows_is_one():
    # Gram off-diagonal {1, 1}, MSE against {0, 0}
    assert orthogonality_loss(Tensor([[1.0, 0.0], [1.0, 0.0]])).item() == 1.0


def test_ortho_matches_pairwise_oracle():
    L = np.random.default_rng(3).standard_normal((8, 16))
    assert abs(orthogonality_loss(Tensor(L)).item() - pairwise_oracle(L)) < 1e-12


def test_ortho_needs_two_rows():
    with pytest.raises(TooFewLatents):
        orthogonality_loss(Tensor(np.ones((1, 4))))


def test_ortho_ignores_diagonal():
    # scaling rows changes the diagonal only when rows are orthogonal
    L = np.diag([1.0, 5.0, 0.3])
    assert orthogonality_loss(Tensor(L)).item() == 0.0


def test_normalized_variant_uses_cosines():
    L = np.array([[2.0, 0.0], [3.0, 3.0]])
    cos = 1 / np.sqrt(2)
    assert abs(orthogonality_loss(Tensor(L), normalize=True).item() - cos ** 2) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_ortho_nonnegative_and_permutation_invariant(k, d, seed):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((k, d))
    v = orthogonality_loss(Tensor(L)).item()
    assert v >= 0
    perm = rng.permutation(k)
    assert abs(orthogonality_loss(Tensor(L[perm])).item() - v) <= 1e-12 * max(1.0, v)


def test_combined_is_sum_of_parts():
    lat = init_latents(6, 4, 5, seed=2, scale=1.0)
    a = orthogonality_loss(lat.spatial).item()
    b = orthogonality_loss(lat.temporal).item()
    assert combined_ortho_loss(lat).item() == a + b


def test_combined_orthogonal_is_zero():
    lat = InteractionLatents(Tensor(np.eye(3)), Tensor(np.eye(3)[:2]))
    assert combined_ortho_loss(lat).item() == 0.0


def test_combined_propagates_too_few():
    with pytest.raises(TooFewLatents):
        combined_ortho_loss(InteractionLatents(Tensor(np.ones((1, 2))), Tensor(np.ones((3, 2)))))


def gradient_descent(L0, lr, steps):
    L = L0.copy()
    for _ in range(steps):
        t = Tensor(L, requires_grad=True)
        loss = orthogonality_loss(t)
        loss.backward()
        L = L - lr * t.grad.data
    return orthogonality_loss(Tensor(L)).item()


def test_descent_reaches_near_orthogonal():
    L0 = np.random.default_rng(0).standard_normal((8, 16)) * 0.3
    assert gradient_descent(L0, 0.1, 500) < 1e-3


@pytest.mark.parametrize("normalize", [False, True])
def test_ortho_gradient_fd(normalize):
    L = np.random.default_rng(4).standard_normal((6, 5))
    assert finite_diff_check(lambda t: orthogonality_loss(t, normalize), L, 1e-4) < 1e-4
