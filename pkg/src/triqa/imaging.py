"""Raster decoding and geometric primitives.

Images are plain numpy arrays of shape ``(H, W, 3)`` in RGB channel order,
either ``uint8`` (as decoded) or floating point with values in ``[0, 1]``.
All geometry here is pure and deterministic; the bilinear convention is
fixed (see :func:`resize_bilinear`) so results are reproducible across
implementations.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import PIL.Image
from PIL import UnidentifiedImageError

from .errors import DecodeError, InvalidDimension, OutOfBounds, UnsupportedFormat

_ALLOWED_FORMATS = {"PNG", "JPEG"}


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle: rows [top, top+height), cols [left, left+width)."""

    top: int
    left: int
    height: int
    width: int


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check that ``img`` is a (H, W, 3) array with H, W >= 1."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidDimension(f"expected (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidDimension(f"image dimensions must be >= 1, got shape {img.shape}")
    return img


def to_float(img: np.ndarray) -> np.ndarray:
    """Return the image as float64 with values in [0, 1].

    uint8 inputs are divided by 255; float inputs are cast without rescaling.
    """
    img = validate_image(img)
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    return img.astype(np.float64, copy=False)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Quantize a float image in [0, 1] to uint8 (round half away handled by rint)."""
    img = validate_image(img)
    if img.dtype == np.uint8:
        return img
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def decode_image(src: bytes | str | Path, normalized: bool = True) -> np.ndarray:
    """Decode a PNG or JPEG byte stream (or file path) into an RGB array.

    Parameters
    ----------
    src : bytes, str or Path
        Encoded image bytes, or a path to an encoded image file.
    normalized : bool
        If True (default) return float64 values in [0, 1]; otherwise uint8.

    Raises
    ------
    DecodeError
        On malformed or truncated streams.
    UnsupportedFormat
        For any container other than PNG or JPEG.
    """
    if isinstance(src, (str, Path)):
        try:
            data = Path(src).read_bytes()
        except FileNotFoundError as exc:
            raise DecodeError(f"cannot read image file: {src}") from exc
    else:
        data = src
    try:
        with PIL.Image.open(io.BytesIO(data)) as pim:
            fmt = pim.format
            if fmt not in _ALLOWED_FORMATS:
                raise UnsupportedFormat(f"unsupported container {fmt!r}; only PNG and JPEG are accepted")
            pim = pim.convert("RGB")
            arr = np.asarray(pim, dtype=np.uint8)
    except UnsupportedFormat:
        raise
    except UnidentifiedImageError as exc:
        raise DecodeError("unrecognized or corrupt image stream") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"malformed image stream: {exc}") from exc
    if arr.ndim == 2:  # safety net; convert("RGB") should prevent this
        arr = np.stack([arr] * 3, axis=-1)
    return arr.astype(np.float64) / 255.0 if normalized else arr


def encode_png(img: np.ndarray) -> bytes:
    """Encode an image to PNG bytes (lossless; float inputs are quantized to 8 bit)."""
    buf = io.BytesIO()
    PIL.Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(img: np.ndarray, quality: int = 90) -> bytes:
    """Encode an image to JPEG bytes at the given quality factor (1..100)."""
    if not 1 <= quality <= 100:
        raise InvalidDimension(f"JPEG quality must be in [1, 100], got {quality}")
    buf = io.BytesIO()
    PIL.Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def write_png(img: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(encode_png(img))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize with bilinear interpolation, align-corners-false convention.

    The source coordinate of output pixel ``i`` along an axis of source
    length ``n`` and output length ``m`` is ``(i + 0.5) * n / m - 0.5``,
    clamped to ``[0, n - 1]``. Output is float64 in [0, 1] regardless of the
    input dtype (uint8 sources are normalized by 255 before blending).

    Raises ``InvalidDimension`` when ``out_h`` or ``out_w`` is < 1.
    """
    img = validate_image(img)
    if out_h < 1 or out_w < 1:
        raise InvalidDimension(f"output dimensions must be >= 1, got {out_h}x{out_w}")
    src_h, src_w = img.shape[:2]

    ys = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * (src_h / out_h) - 0.5, 0.0, src_h - 1.0)
    xs = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * (src_w / out_w) - 0.5, 0.0, src_w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]

    def gather(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        win = img[rows[:, None], cols[None, :], :]
        if img.dtype == np.uint8:
            return win.astype(np.float64) / 255.0
        return win.astype(np.float64, copy=False)

    # Blend rows first, then columns: weights (1-f) + f sum to 1 exactly, so
    # constant images are preserved bitwise.
    top = gather(y0, x0) * (1.0 - fx) + gather(y0, x1) * fx
    bot = gather(y1, x0) * (1.0 - fx) + gather(y1, x1) * fx
    return top * (1.0 - fy) + bot * fy


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    """Copy the window described by ``r``; no resampling, dtype preserved.

    Raises ``OutOfBounds`` when the rectangle does not fit inside the image.
    """
    img = validate_image(img)
    h, w = img.shape[:2]
    if r.height < 1 or r.width < 1:
        raise OutOfBounds(f"crop extent must be positive, got {r}")
    if r.top < 0 or r.left < 0 or r.top + r.height > h or r.left + r.width > w:
        raise OutOfBounds(f"{r} exceeds image of size {h}x{w}")
    return img[r.top : r.top + r.height, r.left : r.left + r.width].copy()
