"""Angular-error metrics, pairwise comparison, and the convergence probe.

The angular error between two RGB vectors is the arccosine of their cosine
similarity. Both the scalar and the vectorized paths compute the cosine as
``dot / sqrt(dot_aa * dot_bb)``: with correctly rounded IEEE arithmetic the
denominator equals the dot product exactly when the vectors are identical,
so the error of a pixel against itself is exactly zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySelection, ZeroVector
from .image import BinaryMask, DiagonalTransform, Image, requantize
from .normalize import ReferenceProfile, fg_bg_gray_world

ZERO_SKIP = "skip"
ZERO_ERROR = "error"
_ZERO_POLICIES = (ZERO_SKIP, ZERO_ERROR)

_PAIR_SEP = "|"


def angular_error(p1, p2) -> float:
    """Angle in radians between two RGB vectors.

    Raises ZeroVector when either vector is all zero; a zero vector has no
    chromatic direction.
    """
    a = _checked_vector(p1, "p1")
    b = _checked_vector(p2, "p2")
    dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    dot_aa = a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
    dot_bb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2]
    if dot_aa == 0.0:
        raise ZeroVector("p1 is the zero vector")
    if dot_bb == 0.0:
        raise ZeroVector("p2 is the zero vector")
    cosine = dot / math.sqrt(dot_aa * dot_bb)
    return math.acos(min(1.0, max(-1.0, cosine)))


def _checked_vector(p, name: str) -> tuple[float, float, float]:
    values = tuple(float(v) for v in p)
    if len(values) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(values)}")
    for v in values:
        if not math.isfinite(v) or v < 0.0:
            raise ValueError(f"{name} components must be finite and non-negative")
    return values


@dataclass(frozen=True)
class AngularErrorReport:
    """RMS angular error plus an optional per-pair breakdown.

    ``per_pair_rms`` maps ``"idA|idB"`` keys to that pair's RMS;
    ``n_skipped`` counts pixel pairs dropped because one side was a zero
    vector.
    """

    rms: float
    n_pixels: int
    n_skipped: int = 0
    per_pair_rms: dict[str, float] | None = None

    def image_sums(self) -> dict[str, float]:
        """Per-image sum of the RMS values of the pairs it participates in."""
        if self.per_pair_rms is None:
            raise ValueError("report has no per-pair breakdown")
        sums: dict[str, float] = {}
        for key, value in self.per_pair_rms.items():
            for ident in key.split(_PAIR_SEP):
                sums[ident] = sums.get(ident, 0.0) + value
        return sums


def _angle_field(a: Image, b: Image) -> tuple[np.ndarray, int]:
    """Per-pixel angles (flattened, zero-vector pairs dropped) and drop count."""
    if a.shape != b.shape:
        raise DimensionMismatch(
            f"images are {a.height}x{a.width} and {b.height}x{b.width}"
        )
    pa, pb = a.pixels, b.pixels
    dot = np.einsum("ijk,ijk->ij", pa, pb)
    dot_aa = np.einsum("ijk,ijk->ij", pa, pa)
    dot_bb = np.einsum("ijk,ijk->ij", pb, pb)
    valid = (dot_aa > 0.0) & (dot_bb > 0.0)
    n_skipped = int(valid.size - valid.sum())
    cosine = dot[valid] / np.sqrt(dot_aa[valid] * dot_bb[valid])
    return np.arccos(np.clip(cosine, -1.0, 1.0)), n_skipped


def rms_angular_error(a: Image, b: Image, zero_policy: str = ZERO_SKIP) -> AngularErrorReport:
    """Root-mean-square of per-pixel angular errors between aligned images.

    ``zero_policy`` controls zero-vector pixels: ``"skip"`` drops them from
    the mean (reported in ``n_skipped``), ``"error"`` raises ZeroVector.
    """
    if zero_policy not in _ZERO_POLICIES:
        raise ValueError(f"unknown zero policy {zero_policy!r}")
    angles, n_skipped = _angle_field(a, b)
    if zero_policy == ZERO_ERROR and n_skipped:
        raise ZeroVector(f"{n_skipped} pixel pair(s) contain a zero vector")
    if angles.size == 0:
        raise EmptySelection("every pixel pair contained a zero vector")
    rms = math.sqrt(float(np.mean(np.square(angles))))
    return AngularErrorReport(rms=rms, n_pixels=int(angles.size), n_skipped=n_skipped)


def pairwise_comparison(images, ids=None, zero_policy: str = ZERO_SKIP) -> AngularErrorReport:
    """RMS angular error over every unordered pair of images.

    The report pools all compared pixels for the overall RMS and records one
    ``per_pair_rms`` entry per pair. Identifiers default to positional
    indices and must be unique and free of ``"|"``.
    """
    images = list(images)
    if len(images) < 2:
        raise ValueError(f"need at least two images, got {len(images)}")
    if ids is None:
        ids = [str(i) for i in range(len(images))]
    else:
        ids = [str(i) for i in ids]
        if len(ids) != len(images):
            raise ValueError(f"{len(images)} images but {len(ids)} ids")
    if len(set(ids)) != len(ids):
        raise ValueError("image ids must be unique")
    for ident in ids:
        if _PAIR_SEP in ident:
            raise ValueError(f"image id {ident!r} must not contain {_PAIR_SEP!r}")
    for other, ident in zip(images[1:], ids[1:]):
        if other.shape != images[0].shape:
            raise DimensionMismatch(
                f"image {ident!r} is {other.height}x{other.width}, "
                f"expected {images[0].height}x{images[0].width} (like {ids[0]!r})"
            )
    per_pair: dict[str, float] = {}
    sq_sum = 0.0
    n_pixels = 0
    n_skipped = 0
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            rep = rms_angular_error(images[i], images[j], zero_policy)
            per_pair[f"{ids[i]}{_PAIR_SEP}{ids[j]}"] = rep.rms
            sq_sum += rep.rms * rep.rms * rep.n_pixels
            n_pixels += rep.n_pixels
            n_skipped += rep.n_skipped
    return AngularErrorReport(
        rms=math.sqrt(sq_sum / n_pixels),
        n_pixels=n_pixels,
        n_skipped=n_skipped,
        per_pair_rms=per_pair,
    )


def report_to_csv(report: AngularErrorReport) -> str:
    """Pair table as ``pair_id,rms_radians`` rows.

    Values are written with ``repr``, which round-trips float64 exactly.
    """
    if report.per_pair_rms is None:
        raise ValueError("report has no per-pair breakdown")
    lines = ["pair_id,rms_radians"]
    for key in sorted(report.per_pair_rms):
        lines.append(f"{key},{report.per_pair_rms[key]!r}")
    return "\n".join(lines) + "\n"


def report_to_json(report: AngularErrorReport) -> str:
    payload = {
        "rms_radians": report.rms,
        "n_pixels": report.n_pixels,
        "n_skipped": report.n_skipped,
    }
    if report.per_pair_rms is not None:
        payload["pairs"] = {k: report.per_pair_rms[k] for k in sorted(report.per_pair_rms)}
        payload["image_sums"] = dict(sorted(report.image_sums().items()))
    return json.dumps(payload, indent=2) + "\n"


@dataclass(frozen=True)
class ConvergenceStep:
    """Transforms of one re-normalization round and its drift from the last."""

    background_transform: DiagonalTransform
    foreground_transform: DiagonalTransform
    rms_vs_previous: float


@dataclass(frozen=True)
class ConvergenceTrace:
    steps: tuple[ConvergenceStep, ...]


def convergence_trace(img: Image, mask: BinaryMask, profile: ReferenceProfile,
                      iterations: int, quantize_between: bool = False,
                      background_target: float = 255.0) -> ConvergenceTrace:
    """Feed the two-stage normalizer its own output ``iterations`` times.

    The mask is reused every round. With ``quantize_between`` the output is
    passed through the 8-bit encoder before re-entering, modeling a pipeline
    that stores intermediate files. Each step records both stage transforms
    and the RMS angular error of the round's output against its input.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    current = img
    steps = []
    for _ in range(iterations):
        result = fg_bg_gray_world(current, mask, profile, background_target)
        nxt = requantize(result.output) if quantize_between else result.output
        rep = rms_angular_error(current, nxt)
        steps.append(ConvergenceStep(
            background_transform=result.background_transform,
            foreground_transform=result.foreground_transform,
            rms_vs_previous=rep.rms,
        ))
        current = nxt
    return ConvergenceTrace(tuple(steps))


def trace_to_csv(trace: ConvergenceTrace) -> str:
    lines = ["iteration,bg_r,bg_g,bg_b,fg_r,fg_g,fg_b,rms_vs_previous"]
    for i, step in enumerate(trace.steps, start=1):
        bg = step.background_transform
        fg = step.foreground_transform
        lines.append(
            f"{i},{bg.r!r},{bg.g!r},{bg.b!r},{fg.r!r},{fg.g!r},{fg.b!r},"
            f"{step.rms_vs_previous!r}"
        )
    return "\n".join(lines) + "\n"
