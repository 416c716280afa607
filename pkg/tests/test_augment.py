import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armaps.augment import AugmentConfig, augment
from armaps.imaging import bilinear_sample


def test_identity_config_is_exact(rng):
    img = rng.random((1, 16, 12))
    out = augment(img, AugmentConfig.identity(), np.random.default_rng(0))
    assert np.max(np.abs(out - img)) <= 1e-12


def test_pure_flip_mirrors(rng):
    cfg = AugmentConfig.identity()
    cfg.flip_prob = 1.0
    img = rng.random((1, 9, 10))
    assert np.array_equal(augment(img, cfg, np.random.default_rng(0)), img[:, :, ::-1])


def test_fixed_seed_reproduces():
    img = np.random.default_rng(1).random((1, 20, 20))
    a = augment(img, AugmentConfig(), np.random.default_rng(42))
    b = augment(img, AugmentConfig(), np.random.default_rng(42))
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, img)


def test_pure_translation_shifts_content():
    img = np.zeros((1, 12, 12))
    img[0, 5, 5] = 1.0
    cfg = AugmentConfig.identity()
    cfg.translation = (3.0, 3.0)
    out = augment(img, cfg, np.random.default_rng(0))
    assert out[0, 8, 8] == pytest.approx(1.0) and out.sum() == pytest.approx(1.0)


def test_out_of_bounds_is_zero():
    cfg = AugmentConfig.identity()
    cfg.translation = (6.0, 6.0)
    out = augment(np.ones((1, 10, 10)), cfg, np.random.default_rng(0))
    assert np.all(out[0, :6, :] == 0) and np.all(out[0, 6:, 6:] == 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_output_shape_and_range(seed):
    img = np.random.default_rng(seed).random((1, 24, 24))
    out = augment(img, AugmentConfig(), np.random.default_rng(seed))
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0 + 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(rotation=(5.0, -5.0))
    with pytest.raises(ValueError):
        AugmentConfig(flip_prob=1.5)
    with pytest.raises(ValueError):
        AugmentConfig(crop=(0.0, 1.0))


def test_bilinear_sample_midpoints():
    img = np.array([[0.0, 2.0], [4.0, 6.0]])
    assert bilinear_sample(img, 0.5, 0.5) == 3.0
    assert bilinear_sample(img, 0.0, 1.0) == 2.0
    assert bilinear_sample(img, -1.0, 0.0) == 0.0
    assert bilinear_sample(img, -1.0, 0.0, outside="clamp") == 0.0
    assert bilinear_sample(img, 5.0, 5.0, outside="clamp") == 6.0
