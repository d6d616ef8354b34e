import numpy as np
import pytest

from filmnorm import (
    DegenerateChannel,
    Image,
    RetinexConfig,
    apply_diagonal,
    pre_normalize,
    retinex,
    render_scene,
    SceneSpec,
)
from filmnorm.image import DiagonalTransform
from conftest import random_image


class TestPreNormalize:
    def test_result_spans_full_range(self, rng):
        for _ in range(5):
            img = random_image(rng, 12, 12, low=30.0, high=200.0)
            out = pre_normalize(img).pixels
            assert np.allclose(out.min(axis=(0, 1)), 0.0, atol=1e-9)
            assert np.allclose(out.max(axis=(0, 1)), 255.0, atol=1e-9)

    def test_already_spanning_is_identity(self):
        px = np.zeros((2, 2, 3))
        px[0, 0] = 255.0
        px[1, 1] = (40.0, 80.0, 120.0)
        out = pre_normalize(Image(px))
        assert np.array_equal(out.pixels, px)

    def test_affine_mapping_exact(self):
        px = np.zeros((1, 3, 3))
        px[0, 0] = 50.0
        px[0, 1] = 75.0
        px[0, 2] = 100.0
        out = pre_normalize(Image(px)).pixels
        assert np.array_equal(out[0, 0], [0.0, 0.0, 0.0])
        assert np.allclose(out[0, 2], 255.0, rtol=0.0, atol=1e-12)
        assert np.allclose(out[0, 1], 127.5, rtol=0.0, atol=1e-12)

    def test_constant_channel_rejected(self):
        px = np.zeros((2, 2, 3))
        px[:, :, 0] = [[0.0, 255.0], [10.0, 20.0]]
        px[:, :, 2] = [[0.0, 255.0], [10.0, 20.0]]
        px[:, :, 1] = 99.0
        with pytest.raises(DegenerateChannel, match="g"):
            pre_normalize(Image(px))


class TestRetinex:
    def test_constant_image_is_fixed_point(self):
        img = Image(np.full((8, 8, 3), 120.0))
        out = retinex(img, RetinexConfig(pre_normalize=False))
        assert np.allclose(out.pixels, 120.0, rtol=0.0, atol=1e-9)

    def test_output_bounded_by_channel_maxima(self, rng):
        for _ in range(5):
            img = random_image(rng, 24, 24)
            out = retinex(img, RetinexConfig(pre_normalize=False)).pixels
            maxima = img.pixels.max(axis=(0, 1))
            assert np.all(out <= maxima + 1e-9)
            assert np.all(out >= 0.0)

    def test_output_within_display_range(self, rng):
        img = random_image(rng, 24, 24)
        out = retinex(img).pixels
        assert out.min() >= 0.0
        assert out.max() <= 255.0

    def test_deterministic(self, rng):
        img = random_image(rng, 20, 20)
        a = retinex(img).pixels
        b = retinex(img).pixels
        assert np.array_equal(a, b)

    def test_zero_iterations_returns_prenormalized_input(self, rng):
        img = random_image(rng, 10, 10, low=20.0, high=230.0)
        out = retinex(img, RetinexConfig(n_iterations=0))
        assert np.array_equal(out.pixels, pre_normalize(img).pixels)

    def test_zero_iterations_without_prenormalize(self, rng):
        img = random_image(rng, 10, 10)
        out = retinex(img, RetinexConfig(n_iterations=0, pre_normalize=False))
        assert np.array_equal(out.pixels, img.pixels)

    def test_dark_cast_pushed_toward_midgray(self):
        img, _ = render_scene(SceneSpec(seed=3, n_cells=60, cell_radius=12.0))
        cast = apply_diagonal(img, DiagonalTransform(0.4, 0.4, 0.45))
        out = retinex(cast)
        in_means = cast.pixels.mean(axis=(0, 1))
        out_means = out.pixels.mean(axis=(0, 1))
        assert np.all(np.abs(out_means - 127.5) < np.abs(in_means - 127.5))

    def test_cast_invariance_through_prenormalize(self, rng):
        img, _ = render_scene(SceneSpec(seed=4, n_cells=10, cell_radius=6.0,
                                        width=64, height=64, noise_sigma=1.0))
        base = retinex(img).pixels
        for factors in rng.uniform(0.6, 1.4, size=(4, 3)):
            cast = apply_diagonal(img, DiagonalTransform(*factors))
            assert np.allclose(retinex(cast).pixels, base, rtol=0.0, atol=1e-9)

    def test_degenerate_channel_propagates(self):
        img = Image(np.full((4, 4, 3), 80.0))
        with pytest.raises(DegenerateChannel):
            retinex(img)

    def test_tiny_images_have_no_pyramid(self):
        img = Image(np.array([[[10.0, 20.0, 30.0], [200.0, 150.0, 90.0]]]))
        out = retinex(img, RetinexConfig(pre_normalize=False)).pixels
        assert out.shape == (1, 2, 3)
        assert np.all(out <= img.pixels.max(axis=(0, 1)) + 1e-9)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RetinexConfig(n_iterations=-1)
