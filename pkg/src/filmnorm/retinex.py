"""Multi-resolution ratio-product-reset-average lightness estimation.

Each channel is processed independently in a base-2 log domain (offset by
one so zero intensity is representable). A pyramid of 2x2 block means is
swept from coarse to fine; at every level the running estimate is updated
against each of its four neighbors for a fixed number of iterations:

    candidate = shifted(estimate) + ratios - shifted(ratios)   (ratio, product)
    candidate = min(candidate, channel_maximum)                (reset)
    estimate  = (estimate + candidate) / 2                     (average)

The reset step pins the estimate to the brightest pixel of the channel, so
a constant image is a fixed point and no output exceeds the channel
maximum. The finished coarse estimate is replicated up to the next level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannel
from .image import Image

_NEIGHBOR_SHIFTS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class RetinexConfig:
    """Iteration count per pyramid level and the pre-normalization switch."""

    n_iterations: int = 4
    pre_normalize: bool = True

    def __post_init__(self) -> None:
        if self.n_iterations < 0:
            raise ValueError("n_iterations must be non-negative")


def pre_normalize(img: Image) -> Image:
    """Affinely stretch each channel to span exactly [0, 255].

    Raises DegenerateChannel when any channel is constant, since a constant
    channel has no spread to stretch.
    """
    px = img.pixels
    lo = px.min(axis=(0, 1))
    hi = px.max(axis=(0, 1))
    flat = np.flatnonzero(hi == lo)
    if flat.size:
        names = ", ".join("rgb"[i] for i in flat)
        raise DegenerateChannel(f"channel(s) {names} are constant; cannot stretch")
    return Image((px - lo) * (255.0 / (hi - lo)))


def retinex(img: Image, cfg: RetinexConfig | None = None) -> Image:
    """Estimate lightness per channel; output stays within [0, 255].

    With ``n_iterations == 0`` the (optionally pre-normalized) input is
    returned unchanged.
    """
    cfg = cfg or RetinexConfig()
    if cfg.pre_normalize:
        img = pre_normalize(img)
    if cfg.n_iterations == 0:
        return img
    out = np.empty_like(img.pixels)
    for c in range(3):
        out[:, :, c] = _retinex_channel(img.channel(c), cfg.n_iterations)
    return Image(np.clip(out, 0.0, 255.0))


def _downsample(a: np.ndarray) -> np.ndarray:
    """2x2 block mean; ragged edge blocks average over the pixels present."""
    h, w = a.shape
    row_idx = np.arange(0, h, 2)
    col_idx = np.arange(0, w, 2)
    sums = np.add.reduceat(np.add.reduceat(a, row_idx, axis=0), col_idx, axis=1)
    rows = np.minimum(row_idx + 2, h) - row_idx
    cols = np.minimum(col_idx + 2, w) - col_idx
    return sums / np.outer(rows, cols)


def _upsample(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Pixel replication up to ``shape`` (one row/column may be trimmed)."""
    doubled = np.repeat(np.repeat(a, 2, axis=0), 2, axis=1)
    return doubled[: shape[0], : shape[1]]


def _shifted(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Neighbor values at offset (dy, dx); border pixels see themselves."""
    padded = np.pad(a, 1, mode="edge")
    return padded[1 + dy: 1 + dy + a.shape[0], 1 + dx: 1 + dx + a.shape[1]]


def _retinex_channel(plane: np.ndarray, n_iterations: int) -> np.ndarray:
    levels = [np.log2(plane + 1.0)]
    while True:
        h, w = levels[-1].shape
        if (h + 1) // 2 < 2 or (w + 1) // 2 < 2:
            break
        levels.append(_downsample(levels[-1]))
    maximum = float(levels[0].max())
    ordered = levels[::-1]
    estimate = np.full(ordered[0].shape, maximum)
    for k, ratios in enumerate(ordered):
        for _ in range(n_iterations):
            for dy, dx in _NEIGHBOR_SHIFTS:
                candidate = _shifted(estimate, dy, dx) + ratios - _shifted(ratios, dy, dx)
                np.minimum(candidate, maximum, out=candidate)
                estimate = 0.5 * (estimate + candidate)
        if k + 1 < len(ordered):
            estimate = _upsample(estimate, ordered[k + 1].shape)
    return np.exp2(estimate) - 1.0
