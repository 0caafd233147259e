"""Side-by-side correspondence overlays as RGB pixel buffers."""

import numpy as np

from spectralmatch.geometry import interpolate_keypoints
from spectralmatch.imageio import ImageRaster

SELECTED = (255, 215, 0)
REJECTED = (70, 110, 255)
VALID = (0, 210, 0)
INVALID = (230, 30, 30)
VALID_WINDOW = 15  # px; a prediction is valid inside this square around the true target


def draw_line(canvas: np.ndarray, p0, p1, color):
    (x0, y0), (x1, y1) = p0, p1
    steps = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
    xs = np.rint(np.linspace(x0, x1, steps + 1)).astype(int)
    ys = np.rint(np.linspace(y0, y1, steps + 1)).astype(int)
    ok = (xs >= 0) & (xs < canvas.shape[1]) & (ys >= 0) & (ys < canvas.shape[0])
    canvas[ys[ok], xs[ok]] = color


def draw_dot(canvas: np.ndarray, p, color, radius: int = 1):
    x, y = int(np.rint(p[0])), int(np.rint(p[1]))
    y0, y1 = max(0, y - radius), min(canvas.shape[0], y + radius + 1)
    x0, x1 = max(0, x - radius), min(canvas.shape[1], x + radius + 1)
    canvas[y0:y1, x0:x1] = color


def validity(pred, H, window: int = VALID_WINDOW) -> np.ndarray:
    """True where the predicted target lies in a ``window`` square around H(source)."""
    expected = interpolate_keypoints(H, pred.source)
    half = (window - 1) / 2.0
    off = np.abs(np.asarray(pred.target) - expected)
    return np.all(off <= half, axis=1)  # NaN (at infinity) compares False


def render_overlay(raster_a: ImageRaster, raster_b: ImageRaster, pred, H=None,
                   show_rejected: bool = True) -> np.ndarray:
    """Images side by side with one line per correspondence.

    Without ``H``, selected pairs are drawn in one color and rejected pairs in
    another. With a ground-truth homography, selected pairs are colored by
    validity instead.
    """
    h = max(raster_a.height, raster_b.height)
    w = raster_a.width + raster_b.width
    canvas = np.zeros((h, w, 3), dtype=np.uint8)
    canvas[: raster_a.height, : raster_a.width] = raster_a.intensity[..., None]
    canvas[: raster_b.height, raster_a.width:] = raster_b.intensity[..., None]

    valid = validity(pred, H) if H is not None else None
    order = np.argsort(np.asarray(pred.selected, dtype=int), kind="stable")  # rejected first, underneath
    for i in order:
        sel = bool(pred.selected[i])
        if not sel and not show_rejected:
            continue
        if not sel:
            color = REJECTED
        elif valid is not None:
            color = VALID if valid[i] else INVALID
        else:
            color = SELECTED
        p0 = pred.source[i]
        p1 = (pred.target[i][0] + raster_a.width, pred.target[i][1])
        draw_line(canvas, p0, p1, color)
        draw_dot(canvas, p0, color)
        draw_dot(canvas, p1, color)
    return canvas
