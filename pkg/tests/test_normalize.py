import numpy as np
import pytest

from filmnorm import (
    DEFAULT_REFERENCE_PROFILE,
    REGION_ALL,
    REGION_BACKGROUND,
    REGION_FOREGROUND,
    BinaryMask,
    ChannelMeans,
    DimensionMismatch,
    EmptySelection,
    GrayTarget,
    Image,
    ReferenceProfile,
    ZeroMean,
    apply_diagonal,
    build_reference_profile,
    channel_means,
    database_gray_world,
    fg_bg_gray_world,
    gray_world,
    render_scene,
    requantize,
    SceneSpec,
)
from filmnorm.image import DiagonalTransform
from conftest import random_image, random_mask_array


def masked_image(rng, fg_color, bg_color, height=12, width=12):
    fg = random_mask_array(rng, height, width)
    px = np.empty((height, width, 3))
    px[fg] = fg_color
    px[~fg] = bg_color
    return Image(px), BinaryMask(fg)


class TestGrayWorld:
    def test_already_gray_is_identity(self):
        img = Image(np.full((4, 4, 3), 127.5))
        res = gray_world(img)
        assert res.background_transform.as_tuple() == (1.0, 1.0, 1.0)
        assert np.array_equal(res.output.pixels, img.pixels)

    def test_exact_ratio_transform(self):
        px = np.zeros((1, 2, 3))
        px[0, 0] = (0.0, 0.0, 0.0)
        px[0, 1] = (127.5, 170.0, 255.0)
        res = gray_world(Image(px))  # means (63.75, 85, 127.5)
        assert res.background_transform.as_tuple() == (2.0, 1.5, 1.0)

    def test_output_means_hit_target(self, rng):
        for _ in range(5):
            img = random_image(rng, 16, 16, low=1.0)
            res = gray_world(img)
            assert np.allclose(channel_means(res.output).as_array(), 127.5,
                               rtol=0.0, atol=1e-9)

    def test_custom_target(self, rng):
        img = random_image(rng, low=1.0)
        target = GrayTarget(ChannelMeans(60.0, 100.0, 140.0))
        res = gray_world(img, target)
        assert np.allclose(channel_means(res.output).as_array(),
                           [60.0, 100.0, 140.0], rtol=0.0, atol=1e-9)

    def test_zero_mean_channel(self):
        px = np.ones((2, 2, 3))
        px[:, :, 2] = 0.0
        with pytest.raises(ZeroMean):
            gray_world(Image(px))

    def test_gray_target_validation(self):
        with pytest.raises(ValueError):
            GrayTarget(ChannelMeans(0.0, 127.5, 127.5))
        with pytest.raises(ValueError):
            GrayTarget(ChannelMeans(127.5, 256.0, 127.5))


class TestDatabaseGrayWorld:
    def test_identity_when_means_match_profile(self):
        img = Image(np.full((3, 3, 3), 1.0) * np.array([183.0, 189.0, 214.0]))
        res = database_gray_world(img, DEFAULT_REFERENCE_PROFILE)
        assert res.background_transform.as_tuple() == (1.0, 1.0, 1.0)

    def test_exact_doubling(self):
        img = Image(np.full((3, 3, 3), 1.0) * np.array([91.5, 94.5, 107.0]))
        res = database_gray_world(img, DEFAULT_REFERENCE_PROFILE)
        assert res.background_transform.as_tuple() == (2.0, 2.0, 2.0)

    def test_output_means_hit_profile(self, rng):
        profile = ReferenceProfile(ChannelMeans(150.0, 160.0, 170.0), n_images=1)
        for _ in range(5):
            img = random_image(rng, low=1.0)
            res = database_gray_world(img, profile)
            assert np.allclose(channel_means(res.output).as_array(),
                               profile.means.as_array(), rtol=0.0, atol=1e-9)

    def test_region_restriction(self, rng):
        img = random_image(rng, low=1.0)
        mask = BinaryMask(random_mask_array(rng))
        res = database_gray_world(img, DEFAULT_REFERENCE_PROFILE,
                                  mask, REGION_FOREGROUND)
        got = channel_means(res.output, mask, REGION_FOREGROUND).as_array()
        assert np.allclose(got, [183.0, 189.0, 214.0], rtol=0.0, atol=1e-9)
        assert np.array_equal(res.output.pixels[mask.background],
                              img.pixels[mask.background])


class TestFgBgGrayWorld:
    def test_frozen_constant_regions(self, rng):
        img, mask = masked_image(rng, (100.0, 120.0, 140.0), (200.0, 204.0, 220.0))
        res = fg_bg_gray_world(img, mask, DEFAULT_REFERENCE_PROFILE)
        assert res.background_transform.as_array() == pytest.approx(
            [1.275, 1.25, 255.0 / 220.0], abs=1e-12)
        # stage-1 foreground means, then the profile ratio on top of them
        stage1_fg = np.array([127.5, 150.0, 140.0 * 255.0 / 220.0])
        assert res.foreground_transform.as_array() == pytest.approx(
            np.array([183.0, 189.0, 214.0]) / stage1_fg, abs=1e-12)
        out_fg = channel_means(res.output, mask, REGION_FOREGROUND).as_array()
        out_bg = channel_means(res.output, mask, REGION_BACKGROUND).as_array()
        assert out_fg == pytest.approx([183.0, 189.0, 214.0], abs=1e-9)
        assert out_bg == pytest.approx([255.0, 255.0, 255.0], abs=1e-9)

    def test_fixpoint_input_gives_unit_transforms(self, rng):
        img, mask = masked_image(rng, (183.0, 189.0, 214.0), (255.0, 255.0, 255.0))
        res = fg_bg_gray_world(img, mask, DEFAULT_REFERENCE_PROFILE)
        assert res.background_transform.as_tuple() == (1.0, 1.0, 1.0)
        assert res.foreground_transform.as_tuple() == (1.0, 1.0, 1.0)
        assert np.array_equal(res.output.pixels, img.pixels)

    def test_postconditions_on_cast_scenes(self, rng):
        for seed in range(5):
            img, mask = render_scene(SceneSpec(seed=seed, width=96, height=96,
                                               n_cells=8, cell_radius=5.0,
                                               radius_jitter=1.0))
            factors = rng.uniform(0.6, 1.4, size=3)
            cast = apply_diagonal(img, DiagonalTransform(*factors))
            res = fg_bg_gray_world(cast, mask, DEFAULT_REFERENCE_PROFILE)
            fg = channel_means(res.output, mask, REGION_FOREGROUND).as_array()
            bg = channel_means(res.output, mask, REGION_BACKGROUND).as_array()
            assert np.allclose(fg, [183.0, 189.0, 214.0], rtol=0.0, atol=1e-9)
            assert np.allclose(bg, 255.0, rtol=0.0, atol=1e-9)

    def test_background_pixels_only_scaled_once(self, rng):
        img, mask = masked_image(rng, (90.0, 95.0, 100.0), (180.0, 190.0, 200.0))
        res = fg_bg_gray_world(img, mask, DEFAULT_REFERENCE_PROFILE)
        want_bg = img.pixels[mask.background] * res.background_transform.as_array()
        assert np.array_equal(res.output.pixels[mask.background], want_bg)

    def test_custom_background_target(self, rng):
        img, mask = masked_image(rng, (90.0, 95.0, 100.0), (180.0, 190.0, 200.0))
        res = fg_bg_gray_world(img, mask, DEFAULT_REFERENCE_PROFILE,
                               background_target=240.0)
        bg = channel_means(res.output, mask, REGION_BACKGROUND).as_array()
        assert np.allclose(bg, 240.0, rtol=0.0, atol=1e-9)

    def test_float_idempotence(self, rng):
        img, mask = render_scene(SceneSpec(seed=9, width=96, height=96,
                                           n_cells=8, cell_radius=5.0,
                                           radius_jitter=1.0))
        first = fg_bg_gray_world(img, mask, DEFAULT_REFERENCE_PROFILE)
        second = fg_bg_gray_world(first.output, mask, DEFAULT_REFERENCE_PROFILE)
        entries = (second.background_transform.as_tuple()
                   + second.foreground_transform.as_tuple())
        assert max(abs(e - 1.0) for e in entries) < 1e-9

    def test_quantized_idempotence(self, rng):
        img, mask = render_scene(SceneSpec(seed=10, width=96, height=96,
                                           n_cells=8, cell_radius=5.0,
                                           radius_jitter=1.0))
        cast = apply_diagonal(img, DiagonalTransform(1.3, 0.8, 1.1))
        first = fg_bg_gray_world(cast, mask, DEFAULT_REFERENCE_PROFILE)
        second = fg_bg_gray_world(requantize(first.output), mask,
                                  DEFAULT_REFERENCE_PROFILE)
        entries = (second.background_transform.as_tuple()
                   + second.foreground_transform.as_tuple())
        assert max(abs(e - 1.0) for e in entries) < 1e-2

    def test_empty_foreground_raises(self):
        img = Image(np.full((3, 3, 3), 100.0))
        with pytest.raises(EmptySelection):
            fg_bg_gray_world(img, BinaryMask(np.zeros((3, 3), dtype=bool)),
                             DEFAULT_REFERENCE_PROFILE)

    def test_empty_background_raises(self):
        img = Image(np.full((3, 3, 3), 100.0))
        with pytest.raises(EmptySelection):
            fg_bg_gray_world(img, BinaryMask(np.ones((3, 3), dtype=bool)),
                             DEFAULT_REFERENCE_PROFILE)

    def test_zero_background_mean_raises(self, rng):
        img, mask = masked_image(rng, (90.0, 95.0, 100.0), (0.0, 0.0, 0.0))
        with pytest.raises(ZeroMean):
            fg_bg_gray_world(img, mask, DEFAULT_REFERENCE_PROFILE)

    def test_mask_mismatch_raises(self, rng):
        img = random_image(rng, 8, 8)
        with pytest.raises(DimensionMismatch):
            fg_bg_gray_world(img, BinaryMask(np.ones((4, 4), dtype=bool)),
                             DEFAULT_REFERENCE_PROFILE)


class TestBuildReferenceProfile:
    def test_single_image_constant_fg(self, rng):
        # background exactly at the white point makes stage one the identity
        img, mask = masked_image(rng, (183.0, 189.0, 214.0), (255.0, 255.0, 255.0))
        profile = build_reference_profile([(img, mask)])
        assert profile.means.as_tuple() == (183.0, 189.0, 214.0)
        assert profile.n_images == 1

    def test_weighted_pooling(self):
        def flat(fg_color, n_fg, n_total=200):
            px = np.full((1, n_total, 3), 255.0)
            px[0, :n_fg] = fg_color
            fg = np.zeros((1, n_total), dtype=bool)
            fg[0, :n_fg] = True
            return Image(px), BinaryMask(fg)

        pairs = [flat((100.0, 100.0, 100.0), 50), flat((200.0, 200.0, 200.0), 150)]
        profile = build_reference_profile(pairs)
        assert profile.means.as_tuple() == (175.0, 175.0, 175.0)
        assert profile.n_images == 2

    def test_matches_flat_pooling_oracle(self, rng):
        pairs = []
        for seed in range(12):
            pairs.append(render_scene(SceneSpec(seed=seed, width=48, height=48,
                                                n_cells=4, cell_radius=4.0,
                                                radius_jitter=1.0)))
        profile = build_reference_profile(pairs)
        pooled = []
        for img, mask in pairs:
            bg = channel_means(img, mask, REGION_BACKGROUND).as_array()
            scaled = img.pixels[mask.foreground] * (255.0 / bg)
            pooled.append(scaled)
        want = np.concatenate(pooled).mean(axis=0)
        assert np.allclose(profile.means.as_array(), want, rtol=0.0, atol=1e-9)

    def test_source_names_recorded(self, rng):
        img, mask = masked_image(rng, (120.0, 120.0, 120.0), (240.0, 240.0, 240.0))
        profile = build_reference_profile([(img, mask)], sources=["slide-7"])
        assert profile.created_from == ("slide-7",)

    def test_offending_image_identified(self, rng):
        good_img, good_mask = masked_image(rng, (120.0,) * 3, (240.0,) * 3)
        bad_img = Image(np.full((4, 4, 3), 50.0))
        all_fg = BinaryMask(np.ones((4, 4), dtype=bool))
        with pytest.raises(EmptySelection, match="slide-b"):
            build_reference_profile([(good_img, good_mask), (bad_img, all_fg)],
                                    sources=["slide-a", "slide-b"])

    def test_empty_pair_list(self):
        with pytest.raises(ValueError):
            build_reference_profile([])

    def test_source_count_mismatch(self, rng):
        img, mask = masked_image(rng, (120.0,) * 3, (240.0,) * 3)
        with pytest.raises(ValueError):
            build_reference_profile([(img, mask)], sources=["a", "b"])


class TestReferenceProfile:
    def test_json_round_trip_bit_exact(self, rng):
        for _ in range(20):
            means = ChannelMeans(*rng.uniform(1e-6, 255.0, size=3))
            profile = ReferenceProfile(means, n_images=int(rng.integers(1, 40)),
                                       created_from=("x", "y"))
            back = ReferenceProfile.from_json(profile.to_json())
            assert back == profile

    def test_wire_keys(self):
        import json
        payload = json.loads(DEFAULT_REFERENCE_PROFILE.to_json())
        assert set(payload) == {"mu_c", "n_images", "created_from"}
        assert payload["mu_c"] == [183.0, 189.0, 214.0]
        assert payload["n_images"] == 12

    @pytest.mark.parametrize("text", [
        "not json",
        "{}",
        '{"mu_c": [1, 2], "n_images": 1, "created_from": []}',
        '{"mu_c": [0, 2, 3], "n_images": 1, "created_from": []}',
        '{"mu_c": [1, 2, 3], "n_images": 0, "created_from": []}',
        '{"mu_c": [1, 2, 300], "n_images": 1, "created_from": []}',
    ])
    def test_invalid_json_rejected(self, text):
        with pytest.raises(ValueError):
            ReferenceProfile.from_json(text)

    def test_validation(self):
        with pytest.raises(ValueError):
            ReferenceProfile(ChannelMeans(0.0, 1.0, 1.0), n_images=1)
        with pytest.raises(ValueError):
            ReferenceProfile(ChannelMeans(1.0, 1.0, 1.0), n_images=0)
