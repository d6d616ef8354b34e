"""Foreground/background separation for two-class microscope scenes.

Two methods are provided. ``otsu`` thresholds a single working channel at
the between-class-variance maximum; cells are darker than plasma, so
foreground is everything at or below the threshold. ``area-double`` (the
default) seeds conservative foreground inside a permissive region and
recovers whole blobs by connected-component reconstruction, with the
threshold pair placed around a histogram valley that an area-granulometry
cell-size estimate helps localize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateHistogram, NoBlobsFound
from .image import BinaryMask, Image

METHOD_OTSU = "otsu"
METHOD_AREA_DOUBLE = "area-double"
METHODS = (METHOD_AREA_DOUBLE, METHOD_OTSU)

CHANNEL_RED = "red"
CHANNEL_GREEN = "green"
CHANNEL_BLUE = "blue"
CHANNEL_LUMINANCE = "luminance"
CHANNELS = (CHANNEL_RED, CHANNEL_GREEN, CHANNEL_BLUE, CHANNEL_LUMINANCE)

_CHANNEL_INDEX = {CHANNEL_RED: 0, CHANNEL_GREEN: 1, CHANNEL_BLUE: 2}
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])  # Rec. 601

# Blobs touch diagonally at their corners, so reconstruction and
# granulometry both use 8-connectivity.
_EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class BinarizeConfig:
    """Tuning knobs for both binarization methods.

    ``strong_offset`` and ``weak_offset`` are subtracted from / added to the
    histogram valley to get the conservative and permissive thresholds.
    ``min_cell_area`` and ``max_cell_area`` bound the granulometry search in
    pixels; ``area_ladder_ratio`` is the geometric step between probed areas.
    A granulometry rung must remove at least ``min_energy_fraction`` of the
    total inverted-channel intensity to count as a detected blob scale.
    """

    method: str = METHOD_AREA_DOUBLE
    working_channel: str = CHANNEL_GREEN
    strong_offset: float = 10.0
    weak_offset: float = 25.0
    min_cell_area: int = 20
    max_cell_area: int = 10_000
    area_ladder_ratio: float = 1.5
    min_energy_fraction: float = 0.01

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.working_channel not in CHANNELS:
            raise ValueError(
                f"unknown channel {self.working_channel!r}, expected one of {CHANNELS}"
            )
        if self.strong_offset < 0 or self.weak_offset < 0:
            raise ValueError("threshold offsets must be non-negative")
        if self.min_cell_area < 1:
            raise ValueError("min_cell_area must be at least 1")
        if self.max_cell_area < self.min_cell_area:
            raise ValueError("max_cell_area must be >= min_cell_area")
        if self.area_ladder_ratio <= 1.0:
            raise ValueError("area_ladder_ratio must be > 1")
        if not 0.0 <= self.min_energy_fraction < 1.0:
            raise ValueError("min_energy_fraction must be in [0, 1)")


@dataclass(frozen=True)
class DoubleThresholds:
    """Histogram split backing the area-double method."""

    valley: int
    strong: float
    weak: float


def working_channel(img: Image, channel: str = CHANNEL_GREEN) -> np.ndarray:
    """8-bit working channel as a ``(height, width)`` uint8 plane."""
    if channel == CHANNEL_LUMINANCE:
        plane = img.pixels @ _LUMA_WEIGHTS
    elif channel in _CHANNEL_INDEX:
        plane = img.channel(_CHANNEL_INDEX[channel])
    else:
        raise ValueError(f"unknown channel {channel!r}, expected one of {CHANNELS}")
    return np.floor(np.clip(plane, 0.0, 255.0) + 0.5).astype(np.uint8)


def otsu_threshold(img: Image, channel: str = CHANNEL_GREEN) -> int:
    """Between-class-variance-maximizing threshold of the working channel.

    Foreground is everything at or below the returned value. Ties resolve to
    the lowest threshold.
    """
    plane = working_channel(img, channel)
    return otsu_from_histogram(np.bincount(plane.ravel(), minlength=256))


def otsu_from_histogram(hist) -> int:
    """Otsu's threshold from a 256-bin histogram, in exact integer arithmetic.

    The between-class variance at threshold t is proportional to
    ``(s0*N - S*n0)**2 / (n0*n1)`` where ``n0, s0`` are the count and
    intensity sum at or below t and ``N, S`` are their totals. Candidates
    are compared by cross-multiplication so ties cannot be created or broken
    by rounding; of exactly tied thresholds the middle one is returned, so
    a symmetric two-cluster histogram splits centrally instead of hugging
    the dark cluster.
    """
    counts = [int(c) for c in hist]
    if len(counts) != 256:
        raise ValueError(f"expected a 256-bin histogram, got {len(counts)} bins")
    if any(c < 0 for c in counts):
        raise ValueError("histogram counts must be non-negative")
    if sum(1 for c in counts if c > 0) < 2:
        raise DegenerateHistogram("channel is constant; cannot threshold")
    total = sum(counts)
    total_sum = sum(v * c for v, c in enumerate(counts))
    best: list[int] = []
    best_num = -1
    best_den = 1
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = s0 * total - total_sum * n0
        num_sq = num * num
        den = n0 * n1
        if not best or num_sq * best_den > best_num * den:
            best = [t]
            best_num, best_den = num_sq, den
        elif num_sq * best_den == best_num * den:
            best.append(t)
    return best[(len(best) - 1) // 2]


def _area_ladder(cfg: BinarizeConfig, pixel_count: int) -> list[int]:
    # Rungs above half the raster could only match the background itself,
    # so the ladder is capped there as well as at max_cell_area.
    top = min(cfg.max_cell_area, pixel_count // 2)
    rungs: list[int] = []
    area = float(cfg.min_cell_area)
    while area <= top:
        rung = int(round(area))
        if not rungs or rung > rungs[-1]:
            rungs.append(rung)
        area *= cfg.area_ladder_ratio
    return rungs


def estimate_cell_area(img: Image, cfg: BinarizeConfig | None = None) -> int:
    """Dominant blob area of the inverted working channel, in pixels.

    An area opening at area ``a`` keeps, at every gray level of the inverted
    channel, only the 8-connected level-set components of at least ``a``
    pixels. Sweeping ``a`` up a geometric ladder and integrating the
    surviving intensity gives a granulometric curve whose largest drop marks
    the dominant blob size. The level-set decomposition is computed once per
    distinct gray level and reused for every rung.

    Raises NoBlobsFound when no rung removes a significant fraction of the
    total intensity, i.e. the scene has no blob structure in the probed
    range.
    """
    cfg = cfg or BinarizeConfig()
    inverted = 255 - working_channel(img, cfg.working_channel)
    rungs = _area_ladder(cfg, inverted.size)
    if not rungs:
        raise NoBlobsFound("image too small for the configured area range")
    rung_arr = np.asarray(rungs)
    # survivors[0] is the identity opening (total intensity); survivors[k+1]
    # is the intensity surviving the opening at rungs[k].
    survivors = np.zeros(len(rungs) + 1, dtype=np.int64)
    prev_level = 0
    for level in np.unique(inverted):
        level = int(level)
        if level == 0:
            continue
        # Level sets are constant between consecutive distinct values, so
        # this labeling stands in for (level - prev_level) thresholds.
        weight = level - prev_level
        prev_level = level
        labels, n = ndimage.label(inverted >= level, structure=_EIGHT_CONN)
        if n == 0:
            continue
        areas = np.sort(np.bincount(labels.ravel())[1:])
        suffix = np.concatenate([np.cumsum(areas[::-1])[::-1], [0]])
        survivors[0] += weight * int(suffix[0])
        survivors[1:] += weight * suffix[np.searchsorted(areas, rung_arr, side="left")]
    total_energy = int(survivors[0])
    if total_energy == 0:
        raise NoBlobsFound("inverted channel carries no intensity")
    losses = survivors[:-1] - survivors[1:]
    k = int(np.argmax(losses))
    if losses[k] <= cfg.min_energy_fraction * total_energy:
        raise NoBlobsFound("no area scale removes a significant intensity fraction")
    return rungs[k]


def estimate_double_thresholds(img: Image, cfg: BinarizeConfig | None = None) -> DoubleThresholds:
    """Conservative/permissive threshold pair around the class valley.

    A provisional Otsu split, despeckled of components far below the
    granulometry cell-size estimate, yields separate foreground and
    background histograms. The valley is the intensity that misclassifies
    the fewest provisional pixels (middle of the tie range); the config
    offsets widen the pair around it.
    """
    cfg = cfg or BinarizeConfig()
    plane = working_channel(img, cfg.working_channel)
    hist = np.bincount(plane.ravel(), minlength=256)
    provisional = plane <= otsu_from_histogram(hist)
    blob_area = estimate_cell_area(img, cfg)
    # Provisional specks far below cell scale would smear the foreground
    # histogram toward the background mode.
    min_keep = max(1, blob_area // 4)
    labels, n = ndimage.label(provisional, structure=_EIGHT_CONN)
    if n > 0:
        keep = np.bincount(labels.ravel()) >= min_keep
        keep[0] = False
        provisional = keep[labels]
    fg_hist = np.bincount(plane[provisional], minlength=256)
    bg_hist = np.bincount(plane[~provisional], minlength=256)
    valley = _histogram_valley(fg_hist, bg_hist)
    return DoubleThresholds(
        valley=valley,
        strong=valley - cfg.strong_offset,
        weak=valley + cfg.weak_offset,
    )


def _histogram_valley(fg_hist: np.ndarray, bg_hist: np.ndarray) -> int:
    """Split minimizing provisional misclassification; middle of the tie range."""
    fg_above = fg_hist.sum() - np.cumsum(fg_hist)
    bg_at_or_below = np.cumsum(bg_hist)
    err = fg_above + bg_at_or_below
    ties = np.flatnonzero(err == err.min())
    return int(ties[(len(ties) - 1) // 2])


def double_threshold_mask(img: Image, cfg: BinarizeConfig | None = None) -> BinaryMask:
    """Seeded double thresholding with connected-component reconstruction.

    Pixels at or below the strong threshold seed the foreground; pixels at
    or below the weak threshold bound it. A weak-region component survives
    only if it contains at least one seed, which recovers full blob extents
    without admitting isolated bright-side noise.
    """
    cfg = cfg or BinarizeConfig()
    thresholds = estimate_double_thresholds(img, cfg)
    plane = working_channel(img, cfg.working_channel)
    seeds = plane <= thresholds.strong
    region = plane <= thresholds.weak
    labels, n = ndimage.label(region, structure=_EIGHT_CONN)
    if n == 0:
        return BinaryMask(np.zeros(plane.shape, dtype=bool))
    seeded = np.unique(labels[seeds])
    seeded = seeded[seeded != 0]
    return BinaryMask(np.isin(labels, seeded))


def binarize(img: Image, cfg: BinarizeConfig | None = None) -> BinaryMask:
    """Partition an image into cell foreground and plasma background."""
    cfg = cfg or BinarizeConfig()
    if cfg.method == METHOD_OTSU:
        plane = working_channel(img, cfg.working_channel)
        return BinaryMask(plane <= otsu_threshold(img, cfg.working_channel))
    return double_threshold_mask(img, cfg)
