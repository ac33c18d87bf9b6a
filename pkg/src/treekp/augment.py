"""Image augmentations and synthetic dendrite generation.

Geometric augmentations resample with bilinear interpolation and fill
uncovered area with the median of the image border (the background for
patterns that do not touch the edge). Each geometric operation has a
matching ``*_points`` function mapping (x, y) pixel coordinates of the
input into the output, which gives exact ground truth for tests and
weight learning.

Perspective convention ("keystone"): with corners at pixel centres
(0, 0), (W-1, 0), (W-1, H-1), (0, H-1), the two top corners move
horizontally inward by ``ratio / 4 * (W-1)`` each while the bottom edge
stays fixed. The top edge therefore keeps ``1 - ratio / 2`` of its width:
ratio 0 is the identity, ratio 1 halves it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from treekp._backend import kernels
from treekp.errors import DimensionError
from treekp.imaging import check_raster

BACKGROUND_RGB = (0.93, 0.91, 0.86)
FOREGROUND_RGB = (0.24, 0.22, 0.30)


@dataclass(frozen=True)
class AugmentSpec:
    rotation_deg: float = 0.0
    scale: float = 1.0
    perspective_ratio: float = 0.0
    noise_var: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not 0.0 <= self.perspective_ratio <= 1.0:
            raise ValueError("perspective_ratio must lie in [0, 1]")
        if not self.noise_var >= 0:
            raise ValueError("noise_var must be nonnegative")


@dataclass(frozen=True)
class SynthParams:
    rng_seed: int = 0
    particles: int = 2000
    canvas: int = 512
    stickiness: float = 1.0

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be >= 1")
        if self.canvas < 32:
            raise ValueError("canvas must be >= 32")
        if not 0.0 < self.stickiness <= 1.0:
            raise ValueError("stickiness must lie in (0, 1]")


# ---------------------------------------------------------------------------
# resampling helpers


def _border_fill(img) -> np.ndarray:
    if img.ndim == 2:
        border = np.concatenate([img[0], img[-1], img[1:-1, 0], img[1:-1, -1]])
        return np.array(np.median(border))
    return np.array([_border_fill(img[..., c]) for c in range(img.shape[2])])


def _sample(img, src_x, src_y, fill) -> np.ndarray:
    """Bilinear lookup of ``img`` at source coordinates; outside -> ``fill``."""
    h, w = img.shape[:2]
    coords = np.array([src_y, src_x])
    # a hair of slack so samples that land exactly on the edge stay inside
    inside = (src_x >= -1e-9) & (src_x <= w - 1 + 1e-9) & (src_y >= -1e-9) & (src_y <= h - 1 + 1e-9)
    planes = [img] if img.ndim == 2 else [img[..., c] for c in range(img.shape[2])]
    fills = np.broadcast_to(np.asarray(fill, dtype=np.float64), (len(planes),))
    out = []
    for plane, f in zip(planes, fills):
        v = ndimage.map_coordinates(plane, coords, order=1, mode="nearest")
        out.append(np.where(inside, v, f))
    res = out[0] if img.ndim == 2 else np.stack(out, axis=-1)
    return np.clip(res, 0.0, 1.0)


def _center(shape):
    h, w = shape[:2]
    return (w - 1) / 2.0, (h - 1) / 2.0


# ---------------------------------------------------------------------------
# rotation


def rotate_points(pts, deg, shape) -> np.ndarray:
    """Where input pixels land after ``rotate(img, deg)`` (counterclockwise on screen)."""
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    cx, cy = _center(shape)
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    dx, dy = p[:, 0] - cx, p[:, 1] - cy
    return np.column_stack([cx + c * dx + s * dy, cy - s * dx + c * dy])


def rotate(img, deg) -> np.ndarray:
    img = check_raster(img)
    if deg == 0:
        return img.copy()
    h, w = img.shape[:2]
    cx, cy = _center(img.shape)
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xs - cx, ys - cy
    # inverse of rotate_points
    src_x = cx + c * dx - s * dy
    src_y = cy + s * dx + c * dy
    return _sample(img, src_x, src_y, _border_fill(img))


# ---------------------------------------------------------------------------
# perspective


def homography(src, dst) -> np.ndarray:
    """3x3 projective map sending four ``src`` points onto ``dst`` (h33 = 1)."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i], b[2 * i + 1] = u, v
    return np.append(np.linalg.solve(a, b), 1.0).reshape(3, 3)


def apply_homography(hmat, pts) -> np.ndarray:
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    q = np.column_stack([p, np.ones(len(p))]) @ np.asarray(hmat).T
    return q[:, :2] / q[:, 2:3]


def keystone_corners(shape, ratio):
    """(source, destination) corner lists for the declared keystone map."""
    h, w = shape[:2]
    x1, y1 = w - 1.0, h - 1.0
    d = ratio / 4.0 * x1
    src = [(0.0, 0.0), (x1, 0.0), (x1, y1), (0.0, y1)]
    dst = [(d, 0.0), (x1 - d, 0.0), (x1, y1), (0.0, y1)]
    return src, dst


def perspective_points(pts, ratio, shape) -> np.ndarray:
    src, dst = keystone_corners(shape, ratio)
    return apply_homography(homography(src, dst), pts)


def perspective(img, ratio) -> np.ndarray:
    img = check_raster(img)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")
    if ratio == 0:
        return img.copy()
    h, w = img.shape[:2]
    src, dst = keystone_corners(img.shape, ratio)
    inv = homography(dst, src)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    s = apply_homography(inv, np.column_stack([xs.ravel(), ys.ravel()]))
    return _sample(img, s[:, 0].reshape(h, w), s[:, 1].reshape(h, w), _border_fill(img))


# ---------------------------------------------------------------------------
# scale and noise


def _scaled_size(shape, factor):
    h, w = shape[:2]
    return int(round(h * factor)), int(round(w * factor))


def scale_points(pts, factor) -> np.ndarray:
    """Half-pixel-centre convention: x' = (x + 0.5) * f - 0.5."""
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    return (p + 0.5) * factor - 0.5


def scale(img, factor) -> np.ndarray:
    img = check_raster(img)
    if not factor > 0:
        raise ValueError("factor must be positive")
    oh, ow = _scaled_size(img.shape, factor)
    if oh < 1 or ow < 1:
        raise DimensionError(f"scaling by {factor} leaves an empty image")
    if factor == 1:
        return img.copy()
    ys, xs = np.mgrid[0:oh, 0:ow].astype(np.float64)
    src_x = (xs + 0.5) / factor - 0.5
    src_y = (ys + 0.5) / factor - 0.5
    h, w = img.shape[:2]
    # edge replication rather than fill: the output covers the input exactly
    return _sample(img, np.clip(src_x, 0, w - 1), np.clip(src_y, 0, h - 1), 0.0)


def add_noise(img, var, seed=0) -> np.ndarray:
    """Additive i.i.d. Gaussian noise N(0, var), clipped to [0, 1]."""
    img = check_raster(img)
    if not var >= 0:
        raise ValueError("var must be nonnegative")
    if var == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0.0, math.sqrt(var), img.shape), 0.0, 1.0)


def augment(img, spec: AugmentSpec) -> np.ndarray:
    """Apply scale, perspective, rotation and noise, in that order."""
    out = check_raster(img)
    if spec.scale != 1:
        out = scale(out, spec.scale)
    if spec.perspective_ratio:
        out = perspective(out, spec.perspective_ratio)
    if spec.rotation_deg:
        out = rotate(out, spec.rotation_deg)
    if spec.noise_var:
        out = add_noise(out, spec.noise_var, spec.rng_seed)
    return out


def augment_points(pts, spec: AugmentSpec, shape) -> np.ndarray:
    """Map (x, y) coordinates of the input image through ``augment(., spec)``."""
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if spec.scale != 1:
        p = scale_points(p, spec.scale)
        shape = _scaled_size(shape, spec.scale)
    if spec.perspective_ratio:
        p = perspective_points(p, spec.perspective_ratio, shape)
    if spec.rotation_deg:
        p = rotate_points(p, spec.rotation_deg, shape)
    return p


# ---------------------------------------------------------------------------
# synthetic dendrites


def dla_cluster(p: SynthParams) -> np.ndarray:
    """Boolean DLA cluster grown from the canvas centre (particles + 1 pixels)."""
    rng = np.random.default_rng(p.rng_seed)
    return kernels.dla_kernel(int(p.particles), int(p.canvas), float(p.stickiness), rng).astype(bool)


def render_pattern(cluster) -> np.ndarray:
    """Dilate by one pixel and paint dark on a light background (H, W, 3)."""
    fg = ndimage.binary_dilation(np.asarray(cluster, dtype=bool), structure=np.ones((3, 3), bool))
    img = np.empty(fg.shape + (3,))
    img[...] = BACKGROUND_RGB
    img[fg] = FOREGROUND_RGB
    return img


def generate_dendrite(p: SynthParams) -> np.ndarray:
    return render_pattern(dla_cluster(p))
