"""Gray-world color normalization under the diagonal illumination model.

Three estimators are provided, all producing per-channel scale factors:

* ``gray_world``: scale each channel so its whole-image mean lands on an
  assumed gray level (127.5 by default).
* ``database_gray_world``: scale a region so its means match a reference
  profile measured under a known good illuminant.
* ``fg_bg_gray_world``: the two-stage variant for scenes that split cleanly
  into cell foreground and plasma background. Stage one scales the whole
  image so the background means hit the white point; stage two rescales only
  the foreground so its means match the reference profile. Each class gets
  an anchor appropriate to it, which keeps strongly clipped or desaturated
  inputs from dragging the estimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptySelection, FilmNormError, ZeroMean
from .image import (
    REGION_ALL,
    REGION_BACKGROUND,
    REGION_FOREGROUND,
    BinaryMask,
    ChannelMeans,
    DiagonalTransform,
    Image,
    apply_diagonal,
    channel_means,
)

BACKGROUND_WHITE = 255.0
DEFAULT_GRAY_LEVEL = 127.5


@dataclass(frozen=True)
class GrayTarget:
    """Assumed per-channel gray level for plain gray-world scaling."""

    levels: ChannelMeans = ChannelMeans(DEFAULT_GRAY_LEVEL, DEFAULT_GRAY_LEVEL, DEFAULT_GRAY_LEVEL)

    def __post_init__(self) -> None:
        for value in self.levels.as_tuple():
            if not 0.0 < value <= 255.0:
                raise ValueError(f"gray level must be in (0, 255], got {value}")


@dataclass(frozen=True)
class ReferenceProfile:
    """Foreground channel means measured under the canonical illuminant."""

    means: ChannelMeans
    n_images: int
    created_from: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for value in self.means.as_tuple():
            if not 0.0 < value <= 255.0:
                raise ValueError(f"profile mean must be in (0, 255], got {value}")
        if self.n_images < 1:
            raise ValueError("profile must come from at least one image")

    def to_json(self) -> str:
        payload = {
            "mu_c": list(self.means.as_tuple()),
            "n_images": self.n_images,
            "created_from": list(self.created_from),
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReferenceProfile":
        try:
            payload = json.loads(text)
            means = payload["mu_c"]
            if len(means) != 3:
                raise ValueError(f"mu_c must have 3 entries, got {len(means)}")
            return cls(
                means=ChannelMeans(float(means[0]), float(means[1]), float(means[2])),
                n_images=int(payload["n_images"]),
                created_from=tuple(str(s) for s in payload.get("created_from", [])),
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"not a valid reference profile: {exc}") from exc


# Stain-database means shipped with the tool, for use when no local
# reference set is available.
DEFAULT_REFERENCE_PROFILE = ReferenceProfile(
    means=ChannelMeans(183.0, 189.0, 214.0),
    n_images=12,
    created_from=("builtin-stained-thin-film-v1",),
)


@dataclass(frozen=True)
class NormalizationResult:
    """Output image plus the diagonal transform(s) that produced it."""

    output: Image
    background_transform: DiagonalTransform
    foreground_transform: DiagonalTransform | None = None
    mask_used: BinaryMask | None = None


def _ratio_transform(target: tuple[float, float, float], means: ChannelMeans,
                     context: str) -> DiagonalTransform:
    for name, value in zip("rgb", means.as_tuple()):
        if value == 0.0:
            raise ZeroMean(f"{context} {name} channel mean is zero")
    return DiagonalTransform(
        target[0] / means.r, target[1] / means.g, target[2] / means.b
    )


def gray_world(img: Image, target: GrayTarget | None = None) -> NormalizationResult:
    """Scale every channel so its whole-image mean equals the gray target."""
    target = target or GrayTarget()
    means = channel_means(img)
    transform = _ratio_transform(target.levels.as_tuple(), means, "image")
    return NormalizationResult(apply_diagonal(img, transform), transform)


def database_gray_world(img: Image, profile: ReferenceProfile,
                        mask: BinaryMask | None = None,
                        region: str = REGION_ALL) -> NormalizationResult:
    """Scale the selected region so its means match the reference profile.

    With the default region the whole image is both measured and scaled;
    pass a mask and region to restrict the correction.
    """
    means = channel_means(img, mask, region)
    transform = _ratio_transform(profile.means.as_tuple(), means, f"{region} region")
    output = apply_diagonal(img, transform, mask, region)
    return NormalizationResult(output, transform, mask_used=mask)


def fg_bg_gray_world(img: Image, mask: BinaryMask, profile: ReferenceProfile,
                     background_target: float = BACKGROUND_WHITE) -> NormalizationResult:
    """Two-stage normalization: background to white, foreground to profile.

    Stage one scales the whole image by ``background_target / background
    means``. Stage two measures the stage-one foreground means and rescales
    the foreground pixels only, to the profile means; background pixels keep
    their stage-one values. After the two stages the output background means
    equal the white point and the output foreground means equal the profile
    exactly (up to float arithmetic).
    """
    if not 0.0 < background_target:
        raise ValueError(f"background target must be positive, got {background_target}")
    bg_means = channel_means(img, mask, REGION_BACKGROUND)
    bg_transform = _ratio_transform(
        (background_target,) * 3, bg_means, "background"
    )
    stage1 = apply_diagonal(img, bg_transform)
    fg_means = channel_means(stage1, mask, REGION_FOREGROUND)
    fg_transform = _ratio_transform(profile.means.as_tuple(), fg_means, "foreground")
    output = apply_diagonal(stage1, fg_transform, mask, REGION_FOREGROUND)
    return NormalizationResult(output, bg_transform, fg_transform, mask)


def build_reference_profile(pairs, sources=None,
                            background_target: float = BACKGROUND_WHITE) -> ReferenceProfile:
    """Pool stage-one-normalized foreground pixels into a reference profile.

    ``pairs`` is a sequence of ``(Image, BinaryMask)`` tuples. Every image is
    first scaled so its background means hit the white point (the same stage
    one as :func:`fg_bg_gray_world`); the foreground pixels of all images are
    then pooled and averaged per channel, so larger foregrounds weigh more.

    ``sources`` optionally names each pair for the profile provenance and for
    error messages.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one image/mask pair")
    if sources is not None:
        sources = [str(s) for s in sources]
        if len(sources) != len(pairs):
            raise ValueError(f"{len(pairs)} pairs but {len(sources)} source names")
    else:
        sources = [f"image-{i}" for i in range(len(pairs))]
    pooled_sum = np.zeros(3)
    pooled_count = 0
    for label, (img, mask) in zip(sources, pairs):
        try:
            bg_means = channel_means(img, mask, REGION_BACKGROUND)
            transform = _ratio_transform((background_target,) * 3, bg_means, "background")
            fg_pixels = img.pixels[mask.foreground] * transform.as_array()
            if fg_pixels.shape[0] == 0:
                raise EmptySelection("mask has no foreground pixels")
        except FilmNormError as exc:
            raise type(exc)(f"{label}: {exc}") from exc
        pooled_sum += fg_pixels.sum(axis=0)
        pooled_count += fg_pixels.shape[0]
    means = pooled_sum / pooled_count
    return ReferenceProfile(
        means=ChannelMeans(float(means[0]), float(means[1]), float(means[2])),
        n_images=len(pairs),
        created_from=tuple(sources),
    )
