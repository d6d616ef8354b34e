"""Synthetic two-class scenes with exact ground truth.

A scene is a bright plasma field of dark disk-shaped cells, plus Gaussian
sensor noise applied before proper illumination. The placement rejection
loop keeps disks two pixels apart so every cell is its own 8-connected
blob, which makes the ground-truth mask usable as a granulometry oracle.
Rendering is bit-deterministic per seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import SceneInfeasible
from .image import BinaryMask, DiagonalTransform, Image, apply_diagonal

_PLACEMENT_MARGIN = 2.0


def _check_color(name: str, color) -> tuple[float, float, float]:
    values = tuple(float(v) for v in color)
    if len(values) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(values)}")
    for v in values:
        if not 0.0 <= v <= 255.0:
            raise ValueError(f"{name} components must be in [0, 255], got {v}")
    return values


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one synthetic scene; equal specs render equal scenes."""

    width: int = 256
    height: int = 256
    n_cells: int = 25
    cell_radius: float = 9.0
    radius_jitter: float = 2.0
    plasma_color: tuple[float, float, float] = (200.0, 204.0, 220.0)
    cell_color: tuple[float, float, float] = (120.0, 90.0, 130.0)
    noise_sigma: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("scene must be at least 1x1")
        if self.n_cells < 0:
            raise ValueError("n_cells must be non-negative")
        if self.cell_radius <= 0:
            raise ValueError("cell_radius must be positive")
        if not 0.0 <= self.radius_jitter < self.cell_radius:
            raise ValueError("radius_jitter must be in [0, cell_radius)")
        object.__setattr__(self, "plasma_color", _check_color("plasma_color", self.plasma_color))
        object.__setattr__(self, "cell_color", _check_color("cell_color", self.cell_color))
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def to_json(self) -> str:
        payload = asdict(self)
        payload["plasma_color"] = list(self.plasma_color)
        payload["cell_color"] = list(self.cell_color)
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        try:
            payload = json.loads(text)
            payload["plasma_color"] = tuple(payload["plasma_color"])
            payload["cell_color"] = tuple(payload["cell_color"])
            return cls(**payload)
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"not a valid scene spec: {exc}") from exc


@dataclass(frozen=True)
class IlluminantCast:
    """Simulated unknown illuminant acting through the diagonal model."""

    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        # Delegate validation to the transform the cast acts through.
        self.as_transform()

    def as_transform(self) -> DiagonalTransform:
        return DiagonalTransform(self.r, self.g, self.b)


def render_scene(spec: SceneSpec) -> tuple[Image, BinaryMask]:
    """Render the scene and its exact ground-truth mask.

    Disk placement is rejection-sampled; when the attempt budget runs out
    (too many or too large cells for the canvas) SceneInfeasible is raised.
    """
    rng = np.random.default_rng(spec.seed)
    placed: list[tuple[float, float, float]] = []
    attempts = max(1000, 200 * spec.n_cells)
    while len(placed) < spec.n_cells:
        if attempts == 0:
            raise SceneInfeasible(
                f"could not place {spec.n_cells} disks of radius "
                f"~{spec.cell_radius} on a {spec.width}x{spec.height} canvas"
            )
        attempts -= 1
        radius = spec.cell_radius + spec.radius_jitter * rng.uniform(-1.0, 1.0)
        if 2.0 * radius >= min(spec.width, spec.height):
            continue
        cx = rng.uniform(radius, spec.width - 1.0 - radius)
        cy = rng.uniform(radius, spec.height - 1.0 - radius)
        margin_ok = all(
            (cx - px) ** 2 + (cy - py) ** 2 >= (radius + pr + _PLACEMENT_MARGIN) ** 2
            for px, py, pr in placed
        )
        if margin_ok:
            placed.append((cx, cy, radius))
    fg = np.zeros((spec.height, spec.width), dtype=bool)
    for cx, cy, radius in placed:
        x0 = max(0, int(np.floor(cx - radius)))
        x1 = min(spec.width, int(np.ceil(cx + radius)) + 1)
        y0 = max(0, int(np.floor(cy - radius)))
        y1 = min(spec.height, int(np.ceil(cy + radius)) + 1)
        ys = np.arange(y0, y1)[:, None]
        xs = np.arange(x0, x1)[None, :]
        fg[y0:y1, x0:x1] |= (ys - cy) ** 2 + (xs - cx) ** 2 <= radius ** 2
    img = np.empty((spec.height, spec.width, 3))
    img[:] = spec.plasma_color
    img[fg] = spec.cell_color
    if spec.noise_sigma > 0:
        img += rng.normal(0.0, spec.noise_sigma, img.shape)
        np.clip(img, 0.0, 255.0, out=img)
    return Image(img), BinaryMask(fg)


def apply_cast(img: Image, cast: IlluminantCast) -> Image:
    """Apply a diagonal illumination change to the whole image."""
    return apply_diagonal(img, cast.as_transform())
