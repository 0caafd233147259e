"""Netpbm raster I/O and box-filter image pyramids.

Only the portable anymap formats are supported: PGM (P2/P5) is read as-is,
PPM (P3/P6) is collapsed to 8-bit luminance on load.
"""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from spectralmatch.errors import InputError, MatchWarning

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ImageRaster:
    """Immutable 8-bit grayscale image; ``intensity`` has shape (height, width)."""

    intensity: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.intensity)
        if arr.ndim != 2 or arr.size == 0:
            raise InputError(f"raster must be a non-empty 2D grid, got shape {arr.shape}")
        if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
            raise InputError("raster intensities must be integers")
        if arr.min() < 0 or arr.max() > 255:
            raise InputError("raster intensities must lie in [0, 255]")
        arr = np.array(arr, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "intensity", arr)

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    @property
    def shape(self):
        return self.intensity.shape

    def __eq__(self, other):
        if not isinstance(other, ImageRaster):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.intensity, other.intensity))

    def __hash__(self):
        return hash((self.shape, self.intensity.tobytes()))


@dataclass(frozen=True)
class Pyramid:
    levels: tuple  # index 0 is the finest level
    factor: int = 2

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k) -> ImageRaster:
        return self.levels[k]


def _tokenize_header(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping '#' comments.

    Returns the tokens and the offset just past the single whitespace byte that
    terminates the last token (start of a binary body).
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise InputError("malformed header: unexpected end of file")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    if pos < n:
        pos += 1
    return tokens, pos


def _ascii_body(data: bytes):
    values = []
    for line in data.splitlines():
        line = line.split(b"#", 1)[0]
        values.extend(line.split())
    try:
        return np.array([int(v) for v in values], dtype=np.int64)
    except ValueError as exc:
        raise InputError(f"malformed body: {exc}") from None


def decode_netpbm(data: bytes) -> ImageRaster:
    """Decode PGM/PPM bytes into a grayscale raster."""
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise InputError(f"malformed header: unsupported magic {magic!r}")
    tokens, offset = _tokenize_header(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise InputError("malformed header: non-integer field") from None
    if width <= 0 or height <= 0:
        raise InputError("malformed header: non-positive dimensions")
    if not 0 < maxval < 65536:
        raise InputError("malformed header: maxval out of range")

    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if magic in (b"P2", b"P3"):
        values = _ascii_body(data[offset:])
        if values.size < count:
            raise InputError("truncated body")
        if values.size > count:
            raise InputError("malformed body: trailing samples")
    else:
        bps = 1 if maxval < 256 else 2
        body = data[offset:offset + count * bps]
        if len(body) < count * bps:
            raise InputError("truncated body")
        dtype = np.uint8 if bps == 1 else np.dtype(">u2")
        values = np.frombuffer(body, dtype=dtype).astype(np.int64)
    if values.min(initial=0) < 0 or values.max(initial=0) > maxval:
        raise InputError(f"pixel value exceeds declared maxval {maxval}")

    values = values.reshape(height, width, channels)
    if maxval != 255:
        values = np.floor(values * 255.0 / maxval + 0.5).astype(np.int64)
    if channels == 3:
        r, g, b = (values[..., k].astype(np.float64) for k in range(3))
        lum = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
        gray = np.clip(np.floor(lum + 0.5), 0, 255)
    else:
        gray = values[..., 0]
    return ImageRaster(gray.astype(np.uint8))


def load_raster(path) -> ImageRaster:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"image not found: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return decode_netpbm(data)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def encode_pgm(raster: ImageRaster, binary: bool = True) -> bytes:
    h, w = raster.shape
    if binary:
        return b"P5\n%d %d\n255\n" % (w, h) + raster.intensity.tobytes()
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in raster.intensity)
    return (f"P2\n{w} {h}\n255\n{rows}\n").encode("ascii")


def save_pgm(raster: ImageRaster, path, binary: bool = True):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(raster, binary=binary))


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Encode an (h, w, 3) uint8 array as ASCII PPM (P3)."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InputError("PPM buffer must have shape (h, w, 3)")
    h, w, _ = rgb.shape
    lines = [f"P3\n{w} {h}\n255"]
    for row in rgb.astype(np.uint8):
        lines.append(" ".join(str(int(v)) for v in row.ravel()))
    return ("\n".join(lines) + "\n").encode("ascii")


def save_ppm(rgb: np.ndarray, path):
    with open(path, "wb") as fh:
        fh.write(encode_ppm(rgb))


def downsample(raster: ImageRaster) -> ImageRaster:
    """2x2 box average with edge replication, rounded half up."""
    img = raster.intensity.astype(np.int64)
    h, w = img.shape
    if h % 2:
        img = np.vstack([img, img[-1:]])
    if w % 2:
        img = np.hstack([img, img[:, -1:]])
    s = img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2]
    return ImageRaster(((s + 2) // 4).astype(np.uint8))


def max_levels(width: int, height: int, patch_size: int) -> int:
    """Number of pyramid levels whose coarsest image still holds one patch."""
    n = 0
    while width >= patch_size and height >= patch_size:
        n += 1
        if width == 1 and height == 1:
            break
        width, height = -(-width // 2), -(-height // 2)
    return n


def build_pyramid(raster: ImageRaster, levels: int, patch_size: int = 16) -> Pyramid:
    if levels < 1:
        raise InputError("pyramid needs at least one level")
    allowed = max(1, max_levels(raster.width, raster.height, patch_size))
    if levels > allowed:
        warnings.warn(
            f"pyramid clamped from {levels} to {allowed} levels for patch size {patch_size}",
            MatchWarning,
            stacklevel=2,
        )
        levels = allowed
    out = [raster]
    for _ in range(levels - 1):
        out.append(downsample(out[-1]))
    return Pyramid(tuple(out))
