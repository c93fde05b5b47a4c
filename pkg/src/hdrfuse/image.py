"""Image primitives shared by the fusion pipelines.

An image is a numpy array of normalized intensities in [0, 1]: shape (H, W)
for grayscale, (H, W, 3) for RGB.  File I/O covers 8-bit PNG and binary PPM
(P6, maxval 255); PPM is kept alongside PNG because it is trivial to write
by hand in tests.  All arithmetic here is float64.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

# BT.601 luma coefficients.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

# Smallest measurable nonzero intensity of 8-bit input; floors the
# dynamic-range ratio so it stays finite.
MIN_INTENSITY = 1.0 / 255.0


class ImageFormatError(Exception):
    """File is not a format this toolkit reads or writes."""


def channel_count(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate shape and [0, 1] range, returning the array unchanged."""
    a = np.asarray(img)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise ValueError(f"{name}: expected (H, W) or (H, W, 3), got {a.shape}")
    if a.size == 0:
        raise ValueError(f"{name}: empty image")
    if not np.issubdtype(a.dtype, np.floating):
        raise ValueError(f"{name}: expected float samples, got {a.dtype}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name}: non-finite samples")
    lo, hi = float(a.min()), float(a.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"{name}: samples outside [0, 1] (min {lo}, max {hi})")
    return a


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _parse_ppm(data: bytes, path) -> np.ndarray:
    """Decode binary PPM (P6, maxval 255) into a uint8 (H, W, 3) array."""
    if data[:2] != b"P6":
        raise ImageFormatError(f"{path}: not a binary PPM (P6) file")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise ImageFormatError(f"{path}: truncated PPM header")
        ch = data[pos:pos + 1]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise ImageFormatError(f"{path}: truncated PPM comment")
        elif ch.isdigit():
            end = pos
            while end < len(data) and data[end:end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise ImageFormatError(f"{path}: malformed PPM header")
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 PPM supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    pos += 1  # single whitespace byte after maxval
    n = width * height * 3
    raster = data[pos:pos + n]
    if len(raster) != n:
        raise ImageFormatError(f"{path}: PPM raster truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG or binary PPM into a [0, 1] float64 array.

    Color files give (H, W, 3), grayscale PNG gives (H, W).
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P6":
        raw = _parse_ppm(data, path)
    else:
        try:
            with PILImage.open(io.BytesIO(data)) as im:
                if im.format != "PNG":
                    raise ImageFormatError(
                        f"{path}: unsupported format {im.format!r} (PNG or PPM P6 only)")
                if im.mode not in ("L", "RGB"):
                    raise ImageFormatError(
                        f"{path}: unsupported PNG mode {im.mode!r} (8-bit L or RGB only)")
                raw = np.asarray(im)
        except UnidentifiedImageError as exc:
            raise ImageFormatError(f"{path}: not a PNG or PPM P6 file") from exc
    if raw.size == 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    return raw.astype(np.float64) / 255.0


def quantize(img: np.ndarray) -> np.ndarray:
    """[0, 1] samples to uint8 via round-half-away-from-zero."""
    a = check_image(img)
    return np.floor(a * 255.0 + 0.5).astype(np.uint8)


def encode_image(img: np.ndarray, suffix: str) -> bytes:
    """Encode an image as 8-bit PNG or PPM P6 bytes, chosen by suffix."""
    raw = quantize(img)
    suffix = suffix.lower()
    if suffix == ".png":
        buf = io.BytesIO()
        PILImage.fromarray(raw).save(buf, format="PNG")
        return buf.getvalue()
    if suffix == ".ppm":
        if raw.ndim != 3:
            raise ImageFormatError(
                "PPM P6 stores RGB only; save grayscale images as PNG")
        h, w = raw.shape[:2]
        return b"P6\n%d %d\n255\n" % (w, h) + raw.tobytes()
    raise ImageFormatError(f"unsupported suffix {suffix!r} (use .png or .ppm)")


def save_image(img: np.ndarray, path) -> None:
    """Write an image as 8-bit PNG or PPM P6, chosen by file suffix."""
    path = Path(path)
    path.write_bytes(encode_image(img, path.suffix))


# ---------------------------------------------------------------------------
# Conversions and measurements
# ---------------------------------------------------------------------------

def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an RGB image; grayscale input passes through."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] == 1:
        return a[:, :, 0]
    if a.ndim == 3 and a.shape[2] == 3:
        r, g, b = GRAY_WEIGHTS
        return r * a[:, :, 0] + g * a[:, :, 1] + b * a[:, :, 2]
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got {a.shape}")


def dynamic_range(img: np.ndarray) -> float:
    """log10 ratio of brightest to darkest sample.

    Both extremes are floored at one 8-bit quantization step so the ratio
    stays finite for black pixels; a constant image scores 0.
    """
    a = check_image(img)
    hi = max(float(a.max()), MIN_INTENSITY)
    lo = max(float(a.min()), MIN_INTENSITY)
    return float(np.log10(hi / lo))


# ---------------------------------------------------------------------------
# Exposure pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExposurePair:
    """Two aligned exposures of one scene, darker one in ``under``.

    The constructor checks alignment only; ``load_pair`` orders the two
    images by mean intensity so the convention holds for file input.
    """

    under: np.ndarray
    over: np.ndarray

    def __post_init__(self):
        u = check_image(self.under, "under")
        o = check_image(self.over, "over")
        if u.shape != o.shape:
            raise ValueError(f"exposure shapes differ: {u.shape} vs {o.shape}")

    @property
    def under_gray(self) -> np.ndarray:
        return to_grayscale(self.under)

    @property
    def over_gray(self) -> np.ndarray:
        return to_grayscale(self.over)

    def swapped(self) -> "ExposurePair":
        return ExposurePair(under=self.over, over=self.under)


def load_pair(path_a, path_b) -> ExposurePair:
    """Load two exposures and order them so mean(under) <= mean(over)."""
    a, b = load_image(path_a), load_image(path_b)
    if a.mean() <= b.mean():
        return ExposurePair(under=a, over=b)
    return ExposurePair(under=b, over=a)


# ---------------------------------------------------------------------------
# Patch and window grids
# ---------------------------------------------------------------------------

def window_anchors(length: int, size: int, stride: int) -> np.ndarray:
    """Anchor offsets of size-long windows placed every ``stride`` samples.

    When the strided grid stops short of the end, one extra anchor flush
    with the edge is appended so the trailing region is covered.
    """
    if size > length:
        raise ValueError(f"window size {size} exceeds extent {length}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    anchors = list(range(0, length - size + 1, stride))
    if anchors[-1] + size < length:
        anchors.append(length - size)
    return np.asarray(anchors, dtype=np.intp)


@dataclass(frozen=True)
class PatchGrid:
    """Square patch tiling of an image: side length plus anchor corners."""

    patch_size: int
    anchors: tuple

    def __len__(self):
        return len(self.anchors)


def extract_patches(img: np.ndarray, patch_size: int, stride: int) -> PatchGrid:
    """Tile an image with patch_size squares at the given stride.

    Trailing rows/columns that a plain strided grid would miss are covered
    by extra anchors flush with the image edge, so borders are never lost.
    """
    a = np.asarray(img)
    h, w = a.shape[:2]
    if patch_size > min(h, w):
        raise ValueError(f"patch size {patch_size} exceeds image dims {h}x{w}")
    rows = window_anchors(h, patch_size, stride)
    cols = window_anchors(w, patch_size, stride)
    anchors = tuple((int(r), int(c)) for r in rows for c in cols)
    return PatchGrid(patch_size=patch_size, anchors=anchors)


def window_view(img: np.ndarray, size: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Gather size x size windows at the given anchors.

    Works on any array whose last two axes are spatial; returns
    (..., len(rows), len(cols), size, size).
    """
    sw = np.lib.stride_tricks.sliding_window_view(img, (size, size), axis=(-2, -1))
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    return sw[..., rows[:, None], cols[None, :], :, :]
