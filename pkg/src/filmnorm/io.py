"""File I/O for 8-bit RGB images (PNG, binary PPM) and mask PNGs.

Masks are stored as 8-bit grayscale PNGs with foreground = 0 and
background = 255. All writes go through a temp file and ``os.replace`` so
concurrent runs never observe a half-written output.
"""

from __future__ import annotations

import os
from io import BytesIO
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DecodeError
from .image import BinaryMask, Image, encode_quantize

_IMAGE_SUFFIXES = (".png", ".ppm")


def atomic_write_bytes(path: Path | str, payload: bytes) -> None:
    """Write ``payload`` to ``path`` atomically (same-directory temp + rename)."""
    path = Path(path)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def read_image(path: Path | str) -> Image:
    """Load an 8-bit RGB raster from a PNG or binary PPM file."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        return _read_ppm(path)
    if suffix == ".png":
        return _read_png(path)
    raise DecodeError(f"{path}: unsupported image format {suffix!r} (use .png or .ppm)")


def write_image(path: Path | str, img: Image) -> None:
    """Quantize to 8 bits and write as PNG or binary PPM, by file suffix."""
    path = Path(path)
    quantized = encode_quantize(img)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        atomic_write_bytes(path, _ppm_bytes(quantized))
    elif suffix == ".png":
        atomic_write_bytes(path, _png_bytes(quantized, mode="RGB"))
    else:
        raise ValueError(f"unsupported output format {suffix!r} (use .png or .ppm)")


def read_mask(path: Path | str) -> BinaryMask:
    """Load a foreground/background mask from a grayscale PNG.

    Only the values 0 (foreground) and 255 (background) are accepted; anything
    else means the file is not a mask produced by this tool.
    """
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise DecodeError(f"{path}: masks must be grayscale PNG files")
    try:
        with PILImage.open(path) as im:
            if im.mode != "L":
                raise DecodeError(f"{path}: expected 8-bit grayscale mask, got mode {im.mode!r}")
            arr = np.asarray(im, dtype=np.uint8)
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"{path}: cannot decode PNG: {exc}") from exc
    stray = np.setdiff1d(np.unique(arr), [0, 255])
    if stray.size:
        raise DecodeError(f"{path}: mask values must be 0 or 255, found {stray[:4].tolist()}")
    return BinaryMask(arr == 0)


def write_mask(path: Path | str, mask: BinaryMask) -> None:
    """Write a mask as grayscale PNG (foreground 0, background 255)."""
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise ValueError(f"{path}: masks must be written as PNG")
    arr = np.where(mask.foreground, 0, 255).astype(np.uint8)
    atomic_write_bytes(path, _png_bytes(arr, mode="L"))


def _read_png(path: Path) -> Image:
    try:
        with PILImage.open(path) as im:
            if im.mode != "RGB":
                raise DecodeError(
                    f"{path}: expected 8-bit RGB (no alpha, no palette), got mode {im.mode!r}"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"{path}: cannot decode PNG: {exc}") from exc
    return Image(arr.astype(np.float64))


def _png_bytes(arr: np.ndarray, mode: str) -> bytes:
    buf = BytesIO()
    PILImage.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def _read_ppm(path: Path) -> Image:
    data = path.read_bytes()
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos:pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DecodeError(f"{path}: truncated PPM header")
        return data[start:pos]

    if token() != b"P6":
        raise DecodeError(f"{path}: not a binary PPM (P6) file")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as exc:
        raise DecodeError(f"{path}: malformed PPM header") from exc
    if width < 1 or height < 1:
        raise DecodeError(f"{path}: invalid PPM dimensions {width}x{height}")
    if maxval != 255:
        raise DecodeError(f"{path}: unsupported PPM maxval {maxval}, only 255 is handled")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise DecodeError(f"{path}: missing whitespace after PPM maxval")
    pos += 1
    expected = width * height * 3
    payload = data[pos:pos + expected]
    if len(payload) != expected:
        raise DecodeError(f"{path}: truncated PPM pixel data")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Image(arr.astype(np.float64))


def _ppm_bytes(arr: np.ndarray) -> bytes:
    height, width = arr.shape[:2]
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + arr.tobytes()
