"""RGB raster data model and diagonal-transform primitives.

All algorithm math runs in float64 on the nominal [0, 255] scale. Values may
exceed 255 mid-pipeline; clamping and rounding happen only when an image is
encoded for storage (see :func:`encode_quantize`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySelection

REGION_ALL = "all"
REGION_FOREGROUND = "foreground"
REGION_BACKGROUND = "background"
_REGIONS = (REGION_ALL, REGION_FOREGROUND, REGION_BACKGROUND)


class Image:
    """Planar three-channel raster of finite, non-negative float64 values.

    Pixels are stored as a read-only ``(height, width, 3)`` array in RGB
    channel order. Construction copies and validates the input, so an
    ``Image`` can be treated as immutable.
    """

    __slots__ = ("_px",)

    def __init__(self, pixels) -> None:
        px = np.array(pixels, dtype=np.float64, copy=True)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(
                f"expected a (height, width, 3) pixel array, got shape {px.shape}"
            )
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.isfinite(px).all():
            raise ValueError("image intensities must be finite")
        if (px < 0.0).any():
            raise ValueError("image intensities must be non-negative")
        px.setflags(write=False)
        self._px = px

    @property
    def pixels(self) -> np.ndarray:
        """Read-only ``(height, width, 3)`` float64 array."""
        return self._px

    @property
    def height(self) -> int:
        return self._px.shape[0]

    @property
    def width(self) -> int:
        return self._px.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        """Spatial dimensions ``(height, width)``."""
        return self._px.shape[:2]

    def channel(self, index: int) -> np.ndarray:
        """One channel plane as a read-only ``(height, width)`` view."""
        return self._px[:, :, index]

    def __repr__(self) -> str:
        return f"Image({self.height}x{self.width})"


class BinaryMask:
    """Per-pixel foreground/background partition aligned to an image.

    ``True`` marks foreground (cells), ``False`` marks background (plasma).
    The two regions are disjoint and jointly cover the raster by
    construction; either may be empty.
    """

    __slots__ = ("_fg",)

    def __init__(self, foreground) -> None:
        fg = np.array(foreground, dtype=bool, copy=True)
        if fg.ndim != 2:
            raise ValueError(f"expected a (height, width) boolean array, got shape {fg.shape}")
        if fg.shape[0] < 1 or fg.shape[1] < 1:
            raise ValueError("mask must be at least 1x1")
        fg.setflags(write=False)
        self._fg = fg

    @property
    def foreground(self) -> np.ndarray:
        """Read-only boolean array, ``True`` on foreground pixels."""
        return self._fg

    @property
    def background(self) -> np.ndarray:
        """Boolean array, ``True`` on background pixels."""
        return ~self._fg

    @property
    def height(self) -> int:
        return self._fg.shape[0]

    @property
    def width(self) -> int:
        return self._fg.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._fg.shape

    @property
    def foreground_count(self) -> int:
        return int(self._fg.sum())

    @property
    def background_count(self) -> int:
        return self._fg.size - self.foreground_count

    def __repr__(self) -> str:
        return f"BinaryMask({self.height}x{self.width}, fg={self.foreground_count})"


@dataclass(frozen=True)
class DiagonalTransform:
    """Per-channel scale factors of a diagonal illumination change."""

    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        for name, value in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"scale factor {name} must be finite and positive, got {value}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=np.float64)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)

    def compose(self, other: "DiagonalTransform") -> "DiagonalTransform":
        """Transform equivalent to applying ``self`` first, then ``other``."""
        return DiagonalTransform(self.r * other.r, self.g * other.g, self.b * other.b)


IDENTITY_TRANSFORM = DiagonalTransform(1.0, 1.0, 1.0)


@dataclass(frozen=True)
class ChannelMeans:
    """Per-channel arithmetic means on the nominal [0, 255] scale."""

    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        for name, value in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"channel mean {name} must be finite and non-negative, got {value}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=np.float64)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)


def _check_mask(img: Image, mask: BinaryMask) -> None:
    if mask.shape != img.shape:
        raise DimensionMismatch(
            f"mask is {mask.height}x{mask.width}, image is {img.height}x{img.width}"
        )


def _region_selector(img: Image, mask: BinaryMask | None, region: str) -> np.ndarray | None:
    """Boolean selector for ``region``, or None when the whole image is meant."""
    if region not in _REGIONS:
        raise ValueError(f"unknown region {region!r}, expected one of {_REGIONS}")
    if mask is not None:
        _check_mask(img, mask)
    if region == REGION_ALL:
        return None
    if mask is None:
        raise ValueError(f"region {region!r} requires a mask")
    return mask.foreground if region == REGION_FOREGROUND else mask.background


def channel_means(img: Image, mask: BinaryMask | None = None,
                  region: str = REGION_ALL) -> ChannelMeans:
    """Arithmetic mean of each channel over the selected region.

    Raises EmptySelection when the region contains no pixels, and
    DimensionMismatch when the mask does not align with the image.
    """
    selector = _region_selector(img, mask, region)
    if selector is None:
        data = img.pixels.reshape(-1, 3)
    else:
        data = img.pixels[selector]
        if data.shape[0] == 0:
            raise EmptySelection(f"no pixels selected for region {region!r}")
    m = data.mean(axis=0)
    return ChannelMeans(float(m[0]), float(m[1]), float(m[2]))


def apply_diagonal(img: Image, transform: DiagonalTransform,
                   mask: BinaryMask | None = None, region: str = REGION_ALL) -> Image:
    """Scale each channel by its factor, over the whole image or one region.

    Pixels outside the selected region are returned unchanged. No clamping
    is applied; results may exceed 255.
    """
    selector = _region_selector(img, mask, region)
    factors = transform.as_array()
    if selector is None:
        return Image(img.pixels * factors)
    out = img.pixels.copy()
    out[selector] = out[selector] * factors
    return Image(out)


def encode_quantize(img: Image) -> np.ndarray:
    """Clamp to [0, 255] and round half-up to a uint8 array.

    This is the only place intensity information is discarded; it models an
    8-bit acquisition or storage step.
    """
    return np.floor(np.clip(img.pixels, 0.0, 255.0) + 0.5).astype(np.uint8)


def requantize(img: Image) -> Image:
    """8-bit round trip returned in the float domain."""
    return Image(encode_quantize(img).astype(np.float64))
