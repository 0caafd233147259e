"""Patch grids, per-patch appearance descriptors and saliency scores."""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from spectralmatch.errors import InputError, MatchWarning
from spectralmatch.imageio import ImageRaster

HOG_BINS = 9
DESCRIPTOR_KINDS = ("mpi", "hog", "external")


@dataclass(frozen=True)
class InterestPointGrid:
    """Regular tessellation of an image into square patches.

    ``centers`` is an (n, 2) array of (x, y) pixel positions in row-major
    patch order. Trailing strips narrower than a patch are dropped.
    """

    patch_size: int
    rows: int
    cols: int
    image_shape: tuple  # (height, width) of the tessellated raster
    centers: np.ndarray = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.rows * self.cols

    def index(self, r: int, c: int) -> int:
        return r * self.cols + c

    def rc(self, i: int):
        return divmod(i, self.cols)

    def patch(self, raster: ImageRaster, i: int) -> np.ndarray:
        r, c = self.rc(i)
        p = self.patch_size
        return raster.intensity[r * p:(r + 1) * p, c * p:(c + 1) * p]


@dataclass(frozen=True)
class DescriptorSet:
    values: np.ndarray = field(repr=False)  # (n, d)
    kind: str = "external"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InputError("descriptor values must be an (n, d) array")
        if not np.all(np.isfinite(v)):
            raise InputError("descriptor values must be finite")
        if self.kind not in DESCRIPTOR_KINDS:
            raise InputError(f"unknown descriptor kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SaliencyMap:
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(s)) or s.min(initial=0.0) < 0.0 or s.max(initial=0.0) > 1.0:
            raise InputError("saliency out of range")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def n(self) -> int:
        return self.scores.size


def tessellate(raster: ImageRaster, patch_size: int = 16) -> InterestPointGrid:
    if patch_size < 4:
        raise InputError("patch size must be at least 4")
    if raster.width < patch_size or raster.height < patch_size:
        raise InputError(
            f"patch size {patch_size} too large for {raster.width}x{raster.height} raster"
        )
    rows, cols = raster.height // patch_size, raster.width // patch_size
    r, c = np.divmod(np.arange(rows * cols), cols)
    centers = np.column_stack([(c + 0.5) * patch_size, (r + 0.5) * patch_size])
    centers.setflags(write=False)
    return InterestPointGrid(patch_size, rows, cols, raster.shape, centers)


def _check_grid(raster: ImageRaster, grid: InterestPointGrid):
    if tuple(raster.shape) != tuple(grid.image_shape):
        raise InputError(
            f"grid/raster mismatch: grid built for {grid.image_shape}, raster is {raster.shape}"
        )


def _patch_stack(raster: ImageRaster, grid: InterestPointGrid) -> np.ndarray:
    """All patches as an (n, p, p) float array in grid order."""
    p = grid.patch_size
    img = raster.intensity[: grid.rows * p, : grid.cols * p].astype(np.float64)
    blocks = img.reshape(grid.rows, p, grid.cols, p).transpose(0, 2, 1, 3)
    return blocks.reshape(grid.n, p, p)


def patch_gradients(patches: np.ndarray):
    """Central differences inside each patch with replicated patch borders."""
    padded = np.pad(patches, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = (padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]) / 2.0
    gy = (padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]) / 2.0
    return gx, gy


def mpi_descriptor(raster: ImageRaster, grid: InterestPointGrid) -> DescriptorSet:
    _check_grid(raster, grid)
    means = _patch_stack(raster, grid).mean(axis=(1, 2)) / 255.0
    return DescriptorSet(means[:, None], kind="mpi")


def hog_descriptor(raster: ImageRaster, grid: InterestPointGrid) -> DescriptorSet:
    """Single-cell 9-bin unsigned-orientation histogram per patch, L2-normalized.

    Gradient magnitude is hard-assigned to 20-degree bins over [0, 180).
    Patches with zero gradient get an all-zero row.
    """
    _check_grid(raster, grid)
    gx, gy = patch_gradients(_patch_stack(raster, grid))
    mag = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    bins = np.minimum((angle // (180.0 / HOG_BINS)).astype(np.int64), HOG_BINS - 1)
    hist = np.zeros((grid.n, HOG_BINS))
    rows = np.broadcast_to(np.arange(grid.n)[:, None, None], bins.shape)
    np.add.at(hist, (rows.ravel(), bins.ravel()), mag.ravel())
    norms = np.linalg.norm(hist, axis=1, keepdims=True)
    hist = np.divide(hist, norms, out=np.zeros_like(hist), where=norms > 0)
    return DescriptorSet(hist, kind="hog")


def gradient_saliency(raster: ImageRaster, grid: InterestPointGrid) -> SaliencyMap:
    """Mean in-patch gradient magnitude, scaled so the strongest patch scores 1.

    Built-in stand-in for an external saliency model.
    """
    _check_grid(raster, grid)
    gx, gy = patch_gradients(_patch_stack(raster, grid))
    raw = np.hypot(gx, gy).mean(axis=(1, 2))
    top = raw.max()
    if top <= 0:
        return SaliencyMap(np.zeros(grid.n))
    return SaliencyMap(raw / top)


def _read_records(path, header_fields: int):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"file not found: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                rows.append((lineno, [float(t) for t in stripped.split()]))
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise InputError(f"{path}: empty file")
    _, header = rows[0]
    if len(header) != header_fields or any(h != int(h) or h < 0 for h in header):
        raise InputError(f"{path}: malformed header")
    return path, [int(h) for h in header], rows[1:]


def _align_to_grid(path, records, grid: InterestPointGrid, width: int):
    """Order records by grid center; each (x, y) must hit a center within 0.5 px."""
    out = [None] * grid.n
    ps = grid.patch_size
    for lineno, vals in records:
        if len(vals) != width:
            raise InputError(f"{path}:{lineno}: expected {width} fields, got {len(vals)}")
        if not all(np.isfinite(vals)):
            raise InputError(f"{path}:{lineno}: non-finite value")
        x, y = vals[0], vals[1]
        c, r = int(np.floor(x / ps)), int(np.floor(y / ps))
        ok = 0 <= r < grid.rows and 0 <= c < grid.cols
        if ok:
            i = grid.index(r, c)
            cx, cy = grid.centers[i]
            ok = abs(x - cx) <= 0.5 and abs(y - cy) <= 0.5
        if not ok:
            raise InputError(f"{path}:{lineno}: coordinate ({x}, {y}) matches no grid center")
        if out[i] is not None:
            raise InputError(f"{path}:{lineno}: duplicate record for grid center ({cx}, {cy})")
        out[i] = vals[2:]
    return np.array(out, dtype=np.float64)


def load_descriptors(path, grid: InterestPointGrid) -> DescriptorSet:
    path, (n, d), records = _read_records(path, 2)
    if n != grid.n or len(records) != n:
        raise InputError(f"{path}: descriptor count mismatch (file {n}/{len(records)}, grid {grid.n})")
    if d < 1:
        raise InputError(f"{path}: descriptor dimension must be positive")
    return DescriptorSet(_align_to_grid(path, records, grid, d + 2), kind="external")


def load_saliency(path, grid: InterestPointGrid, tol: float = 1e-6) -> SaliencyMap:
    path, (n,), records = _read_records(path, 1)
    if n != grid.n or len(records) != n:
        raise InputError(f"{path}: saliency count mismatch (file {n}/{len(records)}, grid {grid.n})")
    s = _align_to_grid(path, records, grid, 3)[:, 0]
    if s.min() < -tol or s.max() > 1.0 + tol:
        raise InputError(f"{path}: saliency out of range")
    if s.min() < 0.0 or s.max() > 1.0:
        warnings.warn(f"{path}: saliency clamped to [0, 1]", MatchWarning, stacklevel=2)
        s = np.clip(s, 0.0, 1.0)
    return SaliencyMap(s)


def save_descriptors(desc: DescriptorSet, grid: InterestPointGrid, path):
    with open(path, "w") as fh:
        fh.write(f"{desc.n} {desc.d}\n")
        for (x, y), row in zip(grid.centers, desc.values):
            fh.write(" ".join([f"{x:g}", f"{y:g}"] + [repr(float(v)) for v in row]) + "\n")


def save_saliency(sal: SaliencyMap, grid: InterestPointGrid, path):
    with open(path, "w") as fh:
        fh.write(f"{sal.n}\n")
        for (x, y), s in zip(grid.centers, sal.scores):
            fh.write(f"{x:g} {y:g} {float(s)!r}\n")
