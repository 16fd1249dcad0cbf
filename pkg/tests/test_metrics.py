import numpy as np
import pytest
from skimage.metrics import structural_similarity

from interlat import metrics


def test_psnr_closed_form():
    # mse = 0.01 on range 2 -> 10 log10(400)
    ref = np.zeros((4, 4))
    cmp = np.full((4, 4), 0.1)
    assert abs(metrics.psnr(ref, cmp) - 26.0206) < 0.01
    assert abs(metrics.psnr(ref, cmp) - 10 * np.log10(400)) < 1e-9


def test_psnr_identical_is_capped():
    x = np.random.default_rng(0).random((3, 3))
    assert metrics.psnr(x, x) == 100.0


def test_l1():
    assert metrics.l1([0.0, 1.0], [1.0, 1.0]) == 0.5


def test_ssim_identical_is_one():
    x = np.random.default_rng(1).uniform(-1, 1, (8, 8))
    assert abs(metrics.ssim(x, x) - 1.0) < 1e-9
    clip = np.random.default_rng(2).uniform(-1, 1, (3, 8, 8, 2))
    assert abs(metrics.clip_ssim(clip, clip) - 1.0) < 1e-9


@pytest.mark.parametrize("size", [24, 40])
def test_ssim_matches_scikit_image(size):
    rng = np.random.default_rng(size)
    a = rng.uniform(-1, 1, (size, size))
    b = np.clip(a + rng.normal(0, 0.3, a.shape), -1, 1)
    ref = structural_similarity(a, b, data_range=2.0, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert abs(metrics.ssim(a, b) - ref) < 1e-6


def test_ssim_drops_with_noise():
    rng = np.random.default_rng(3)
    a = rng.uniform(-1, 1, (16, 16))
    assert metrics.ssim(a, a + rng.normal(0, 0.5, a.shape)) < 0.9


def test_window_normalized():
    k = metrics.gaussian_window()
    assert k.size == 11 and abs(k.sum() - 1) < 1e-15


def test_shape_errors():
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        metrics.clip_ssim(np.zeros((4, 4)), np.zeros((4, 4)))
