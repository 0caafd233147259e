"""Procedural test scenes and a synthetic benchmark with known transforms.

Scenes are analytic functions of the plane, so a warped view is rendered by
evaluating the scene at inverse-mapped pixel centers; nothing falls outside.
"""

import os
from dataclasses import dataclass

import numpy as np

from spectralmatch.geometry import Homography, interpolate_keypoints
from spectralmatch.imageio import ImageRaster, save_pgm


@dataclass(frozen=True)
class Scene:
    blobs: np.ndarray  # (k, 4): cx, cy, sigma, amplitude
    gratings: np.ndarray  # (k, 6): cx, cy, extent, angle, frequency, amplitude
    boxes: np.ndarray  # (k, 5): x0, y0, x1, y1, amplitude

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        f = np.zeros(np.broadcast(x, y).shape)
        for cx, cy, s, a in self.blobs:
            f += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
        for cx, cy, ext, th, fr, a in self.gratings:
            env = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * ext * ext))
            f += a * env * np.cos(fr * (x * np.cos(th) + y * np.sin(th)))
        for x0, y0, x1, y1, a in self.boxes:
            f += a * ((x >= x0) & (x < x1) & (y >= y0) & (y < y1))
        return f


def random_scene(rng: np.random.Generator, size: int = 128) -> Scene:
    """Blobs, windowed gratings and flat boxes scattered over a ``size`` square."""
    n_blob = 6 + size // 16
    blobs = np.column_stack([
        rng.uniform(0, size, n_blob), rng.uniform(0, size, n_blob),
        rng.uniform(3, 12, n_blob), rng.uniform(-1, 1, n_blob),
    ])
    n_grat = 2 + size // 32
    gratings = np.column_stack([
        rng.uniform(0, size, n_grat), rng.uniform(0, size, n_grat),
        rng.uniform(8, 20, n_grat), rng.uniform(0, np.pi, n_grat),
        rng.uniform(0.2, 0.6, n_grat), rng.uniform(0.3, 0.8, n_grat),
    ])
    n_box = 2 + size // 32
    x0, y0 = rng.uniform(-8, size, n_box), rng.uniform(-8, size, n_box)
    boxes = np.column_stack([
        x0, y0, x0 + rng.uniform(10, 40, n_box), y0 + rng.uniform(10, 40, n_box),
        rng.uniform(-0.8, 0.8, n_box),
    ])
    return Scene(blobs, gratings, boxes)


def _to_raster(values: np.ndarray, lo: float, hi: float) -> ImageRaster:
    scaled = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
    return ImageRaster(np.clip(np.floor(scaled * 255.0 + 0.5), 0, 255).astype(np.uint8))


def render(scene: Scene, width: int, height: int, H=None, value_range=None):
    """Render the scene as seen through homography ``H`` (source -> view).

    Returns the raster and the (lo, hi) value range used for quantization, so
    a second view can be quantized identically.
    """
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    u, v = u + 0.5, v + 0.5  # pixel centers
    if H is not None:
        Hinv = np.linalg.inv(np.asarray(H.H if isinstance(H, Homography) else H, dtype=np.float64))
        w = Hinv[2, 0] * u + Hinv[2, 1] * v + Hinv[2, 2]
        u, v = ((Hinv[0, 0] * u + Hinv[0, 1] * v + Hinv[0, 2]) / w,
                (Hinv[1, 0] * u + Hinv[1, 1] * v + Hinv[1, 2]) / w)
    values = scene.evaluate(u, v)
    lo, hi = value_range if value_range is not None else (values.min(), values.max())
    return _to_raster(values, lo, hi), (lo, hi)


def texture(rng: np.random.Generator, size: int = 64) -> ImageRaster:
    return render(random_scene(rng, size), size, size)[0]


def translate_wrap(raster: ImageRaster, dx: int, dy: int = 0) -> ImageRaster:
    """Cyclic shift: pixel (x, y) of the input lands at (x + dx, y + dy)."""
    return ImageRaster(np.roll(raster.intensity, shift=(dy, dx), axis=(0, 1)))


def similarity(angle_deg: float, scale: float, tx: float, ty: float, center) -> np.ndarray:
    a = np.radians(angle_deg)
    cx, cy = center
    R = scale * np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    t = np.array([tx, ty]) + np.array([cx, cy]) - R @ np.array([cx, cy])
    H = np.eye(3)
    H[:2, :2] = R
    H[:2, 2] = t
    return H


def perspective(rng: np.random.Generator, size: int, strength: float) -> np.ndarray:
    """Homography moving the four image corners by up to ``strength * size``."""
    src = np.array([[0, 0], [size, 0], [size, size], [0, size]], dtype=np.float64)
    dst = src + rng.uniform(-strength * size, strength * size, src.shape)
    from spectralmatch.geometry import estimate_homography

    return estimate_homography(list(zip(map(tuple, src), map(tuple, dst)))).H


@dataclass(frozen=True)
class SynthPair:
    pair_id: str
    H: np.ndarray
    difficulty: str
    kind: str


def _pick_annotations(rng, H, size, patch_size, count, margin=4.0):
    """Source patch centers whose mapped targets fall inside the target view."""
    n = size // patch_size
    centers = (np.argwhere(np.ones((n, n)))[:, ::-1] + 0.5) * patch_size
    mapped = np.array(interpolate_keypoints(Homography.from_matrix(H), centers), dtype=np.float64)
    ok = np.all(np.isfinite(mapped), axis=1)
    ok &= np.all((mapped >= margin) & (mapped <= size - margin), axis=1)
    idx = np.flatnonzero(ok)
    if idx.size < 5:
        return None
    chosen = np.sort(rng.choice(idx, size=min(count, idx.size), replace=False))
    return centers[chosen], mapped[chosen]


def make_pair_specs(rng, size: int, n_easy: int, n_difficult: int):
    specs = []
    for k in range(n_easy):
        if k % 2 == 0:
            tx, ty = rng.uniform(-0.2, 0.2, 2) * size
            H = similarity(0.0, 1.0, tx, ty, (size / 2, size / 2))
            specs.append(SynthPair(f"easy{k:02d}", H, "easy", "translation"))
        else:
            H = similarity(rng.uniform(-8, 8), rng.uniform(0.92, 1.08),
                           *(rng.uniform(-0.1, 0.1, 2) * size), (size / 2, size / 2))
            specs.append(SynthPair(f"easy{k:02d}", H, "easy", "similarity"))
    for k in range(n_difficult):
        rot = similarity(rng.uniform(-35, 35), rng.uniform(0.7, 1.3), 0.0, 0.0, (size / 2, size / 2))
        H = rot @ perspective(rng, size, 0.22)
        specs.append(SynthPair(f"difficult{k:02d}", H / H[2, 2], "difficult", "perspective"))
    return specs


def write_dataset(out_dir, n_easy: int = 10, n_difficult: int = 10, size: int = 128,
                  patch_size: int = 16, seed: int = 0):
    """Write images, annotations and a manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    specs = make_pair_specs(rng, size, n_easy, n_difficult)
    lines = ["# pair_id image_a image_b annotations difficulty"]
    for spec in specs:
        for _ in range(50):
            scene = random_scene(rng, size)
            picked = _pick_annotations(rng, spec.H, size, patch_size, int(rng.integers(5, 15)))
            if picked is not None:
                break
        else:
            raise RuntimeError(f"could not place annotations for {spec.pair_id}")
        img_a, vrange = render(scene, size, size)
        img_b, _ = render(scene, size, size, spec.H, value_range=vrange)
        name_a, name_b = f"{spec.pair_id}_a.pgm", f"{spec.pair_id}_b.pgm"
        save_pgm(img_a, os.path.join(out_dir, name_a))
        save_pgm(img_b, os.path.join(out_dir, name_b))
        ann = f"{spec.pair_id}.txt"
        with open(os.path.join(out_dir, ann), "w") as fh:
            fh.write(f"# {spec.kind}; x1 y1 x2 y2\n")
            for (x1, y1), (x2, y2) in zip(*picked):
                fh.write(f"{x1:.6f} {y1:.6f} {x2:.6f} {y2:.6f}\n")
        with open(os.path.join(out_dir, f"{spec.pair_id}.H"), "w") as fh:
            for row in spec.H:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        lines.append(f"{spec.pair_id} {name_a} {name_b} {ann} {spec.difficulty}")
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return manifest
