"""Planar homographies from point correspondences."""

import itertools
from dataclasses import dataclass, field

import numpy as np

from spectralmatch.errors import InputError

AT_INFINITY = 1e-12


@dataclass(frozen=True)
class Homography:
    H: np.ndarray = field()

    def __post_init__(self):
        H = np.array(self.H, dtype=np.float64)
        if H.shape != (3, 3) or not np.all(np.isfinite(H)):
            raise InputError("homography must be a finite 3x3 matrix")
        if not H.any():
            raise InputError("homography is singular")
        if abs(H[2, 2]) > 1e-12:
            H = H / H[2, 2]
        else:
            H = H / np.linalg.norm(H)
            flat = H.ravel()
            if flat[np.argmax(np.abs(flat))] < 0:
                H = -H
        if abs(np.linalg.det(H)) <= 1e-12:
            raise InputError("homography is singular")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @classmethod
    def from_matrix(cls, H):
        return cls(H)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.H))


def _normalizer(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - centroid, axis=1))
    if mean_dist <= 1e-12:
        raise InputError("degenerate configuration: coincident points")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0, -s * centroid[0]], [0, s, -s * centroid[1]], [0, 0, 1.0]])


def _collinear(a, b, c, tol=1e-9) -> bool:
    area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    scale = max(np.ptp(np.array([a, b, c]), axis=0).max(), 1.0)
    return abs(area) <= tol * scale * scale


def _as_pairs(pairs):
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim == 3:  # sequence of ((x1, y1), (x2, y2))
        arr = arr.reshape(arr.shape[0], 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise InputError("correspondences must be (x1, y1, x2, y2) rows")
    if not np.all(np.isfinite(arr)):
        raise InputError("correspondences must be finite")
    return arr[:, :2], arr[:, 2:]


def estimate_homography(pairs) -> Homography:
    """Normalized direct linear transform mapping source points onto targets."""
    src, dst = _as_pairs(pairs)
    n = src.shape[0]
    if n < 4:
        raise InputError(f"need at least 4 correspondences, got {n}")
    if n == 4:
        for pts in (src, dst):
            if any(_collinear(*tri) for tri in itertools.combinations(pts, 3)):
                raise InputError("degenerate configuration: three collinear points")

    T1, T2 = _normalizer(src), _normalizer(dst)
    hs = np.column_stack([src, np.ones(n)]) @ T1.T
    hd = np.column_stack([dst, np.ones(n)]) @ T2.T
    A = np.zeros((2 * n, 9))
    for i, ((x, y, w), (u, v, t)) in enumerate(zip(hs, hd)):
        A[2 * i] = [0, 0, 0, -t * x, -t * y, -t * w, v * x, v * y, v * w]
        A[2 * i + 1] = [t * x, t * y, t * w, 0, 0, 0, -u * x, -u * y, -u * w]
    _, sv, vt = np.linalg.svd(A)
    if sv[7] <= 1e-10 * sv[0]:
        raise InputError("degenerate configuration: correspondence system is rank deficient")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(T2) @ Hn @ T1
    try:
        return Homography(H)
    except InputError:
        raise InputError("degenerate configuration: estimated homography is singular") from None


def interpolate_keypoints(H: Homography, points) -> np.ndarray:
    """Map points through ``H``; rows that land at infinity come back as NaN."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    homog = np.column_stack([pts, np.ones(len(pts))]) @ H.H.T
    w = homog[:, 2]
    out = np.full((len(pts), 2), np.nan)
    finite = np.abs(w) > AT_INFINITY
    out[finite] = homog[finite, :2] / w[finite, None]
    return out


def reprojection_errors(H: Homography, pairs) -> np.ndarray:
    src, dst = _as_pairs(pairs)
    mapped = interpolate_keypoints(H, src)
    return np.linalg.norm(mapped - dst, axis=1)  # NaN where at infinity


def classify_pair(H: Homography, gt_pairs, rho: float = 10.0) -> str:
    """'easy' when every ground-truth target is reprojected within ``rho`` px."""
    src, _ = _as_pairs(gt_pairs)
    if len(src) == 0:
        raise InputError("empty ground truth")
    err = reprojection_errors(H, gt_pairs)
    if np.any(np.isnan(err)):
        return "difficult"
    return "easy" if err.max() <= rho else "difficult"


def save_homography(H: Homography, path):
    with open(path, "w") as fh:
        for row in H.H:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_homography(path) -> Homography:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(v) for v in line.split()])
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise InputError(f"{path}: homography file needs 3 rows of 3 numbers")
    return Homography(np.array(rows))
