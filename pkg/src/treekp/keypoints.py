"""Mass center, enclosing circle, seed ring and the multi-window skeleton trace.

Coordinates are (x, y) = (column, row) with y growing downward. Angles for
seed ordering are measured counterclockwise on screen from the +x axis,
i.e. ``atan2(cy - y, x - cx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from treekp._backend import kernels
from treekp.errors import EmptyInputError, NoSeedsError, TruncationError

KINDS = ("root", "seed", "bifurcation", "end")
_KIND_OF_CODE = {1: "seed", 2: "bifurcation", 3: "end"}

DEFAULT_ALPHA = 0.1


@dataclass(frozen=True)
class SearchConfig:
    alpha: float = DEFAULT_ALPHA
    max_steps: Optional[int] = None  # None: 4 * width * height

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class Geometry:
    center: tuple
    r_mec: float
    r_init: float


@dataclass
class KeyPoint:
    index: int
    x: float
    y: float
    kind: str
    parent: Optional[int]
    level: int
    merge: bool = False  # emitted where windows collided


@dataclass(frozen=True)
class TraceStats:
    steps_total: int
    windows_spawned: int
    pixels_visited: int


def _points(pts) -> np.ndarray:
    arr = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise EmptyInputError("empty point set")
    return arr


def mass_center(pts) -> tuple:
    arr = _points(pts)
    return float(arr[:, 0].mean()), float(arr[:, 1].mean())


def enclosing_radius(pts, c) -> float:
    """Radius of the smallest circle centred at ``c`` holding every point."""
    arr = _points(pts)
    return float(np.max(np.hypot(arr[:, 0] - c[0], arr[:, 1] - c[1])))


def half_max_pairwise(pts) -> float:
    """Half the diameter of the point set; approximates ``enclosing_radius`` on dense sets."""
    arr = _points(pts)
    if arr.shape[0] > 3:
        try:
            arr = arr[ConvexHull(arr).vertices]
        except QhullError:
            pass  # collinear: fall through to all pairs
    d = np.hypot(arr[:, None, 0] - arr[None, :, 0], arr[:, None, 1] - arr[None, :, 1])
    return float(d.max()) / 2.0


def skeleton_pixels(skel) -> np.ndarray:
    ys, xs = np.nonzero(np.asarray(skel))
    return np.column_stack([xs, ys]).astype(np.float64)


def skeleton_geometry(skel, alpha=DEFAULT_ALPHA) -> Geometry:
    """Center and enclosing radius from all skeleton pixels."""
    pts = skeleton_pixels(skel)
    c = mass_center(pts)
    r = enclosing_radius(pts, c)
    return Geometry(center=c, r_mec=r, r_init=alpha * r)


def ring_pixels(shape, center, radius) -> np.ndarray:
    """Digital ring: pixels with ``radius - 0.5 <= |p - c| < radius + 0.5``.

    Returned as an (n, 2) int array of (x, y) sorted by angle about ``c``.
    """
    h, w = shape
    cx, cy = center
    x0, x1 = max(0, int(math.floor(cx - radius - 1))), min(w - 1, int(math.ceil(cx + radius + 1)))
    y0, y1 = max(0, int(math.floor(cy - radius - 1))), min(h - 1, int(math.ceil(cy + radius + 1)))
    if x0 > x1 or y0 > y1:
        return np.zeros((0, 2), dtype=np.int64)
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    xs, ys = xs.ravel(), ys.ravel()
    d = np.hypot(xs - cx, ys - cy)
    keep = (d >= radius - 0.5) & (d < radius + 0.5)
    xs, ys, d = xs[keep], ys[keep], d[keep]
    ang = np.degrees(np.arctan2(cy - ys, xs - cx)) % 360.0
    order = np.lexsort((d, ang))
    return np.column_stack([xs[order], ys[order]]).astype(np.int64)


def pixel_angle(x, y, center) -> float:
    return math.degrees(math.atan2(center[1] - y, x - center[0])) % 360.0


def _ring_seeds(skel, center, radius):
    ring = ring_pixels(skel.shape, center, radius)
    if len(ring) == 0:
        return []
    on = skel[ring[:, 1], ring[:, 0]].astype(bool)
    if not on.any():
        return []
    n = len(ring)
    if on.all():
        runs = [list(range(n))]
    else:
        start = int(np.argmin(on))  # an off pixel; runs never wrap past it
        runs, cur = [], []
        for k in range(1, n + 1):
            i = (start + k) % n
            if on[i]:
                cur.append(i)
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
    seeds = []
    for run in runs:
        dev = [abs(math.hypot(ring[i, 0] - center[0], ring[i, 1] - center[1]) - radius) for i in run]
        best = run[int(np.argmin(dev))]
        seeds.append((int(ring[best, 0]), int(ring[best, 1])))
    seeds.sort(key=lambda p: pixel_angle(p[0], p[1], center))
    return seeds


def seed_points(skel, geom: Geometry):
    """Seeds where the initial circle crosses the skeleton, ordered by angle.

    If the circle misses, the radius is halved and doubled alternately
    (r/2, 2r, r/4, 4r, ...) for up to 8 further attempts inside [1, R_MEC);
    below one pixel the digital ring would contain the centre pixel itself.
    Returns ``(seeds, radius_used)`` with seeds as an (n, 2) int array.
    """
    skel = np.asarray(skel).astype(bool)
    r = geom.r_init
    if not r > 0:
        raise NoSeedsError("initial radius is zero (single-pixel skeleton?)")
    tried = [r]
    for k in range(1, 5):
        tried += [r / 2 ** k, r * 2 ** k]
    for radius in tried:
        if radius != r and not 1.0 <= radius < geom.r_mec:
            continue
        seeds = _ring_seeds(skel, geom.center, radius)
        if seeds:
            return np.array(seeds, dtype=np.int64), radius
    raise NoSeedsError("seed circle does not intersect the skeleton")


def trace(skel, seeds, cfg: SearchConfig = SearchConfig(), center=None):
    """Parallel lockstep trace of the skeleton from ``seeds``.

    Rules, applied round by round until no window is left:

    * Key point 0 is a virtual root at ``center`` (default: mass center of
      the skeleton). Each seed is a ``seed`` key point under the root and
      opens one window per skeleton neighbour.
    * In a round every live window first erases its pixel from the map,
      then looks at the remaining 8-neighbours. None: an ``end`` is emitted
      and the window dies. One: the window moves there. Two or more: a
      ``bifurcation`` is emitted and one child window per neighbour replaces
      the window.
    * Windows claiming the same pixel collide and continue as one merged
      window, attached to the first claimant's parent. Next round a merged
      window with no neighbour left emits a merge ``end``; with any
      neighbour left it emits a merge ``bifurcation`` so nothing beyond the
      meeting point is lost. Windows that die in the same round on touching
      pixels met head-on and give a single merge ``end``.
    * Windows are handled in (seed, spawn) order, which fixes every
      tie-break; key-point indices follow emission order.

    Returns ``(keypoints, stats)``. Raises :class:`TruncationError` (with the
    partial result attached) once ``cfg.max_steps`` window steps are used.
    """
    skel = np.asarray(skel).astype(bool)
    seeds = np.asarray(seeds, dtype=np.int64).reshape(-1, 2)
    if len(seeds) == 0:
        raise NoSeedsError("no seeds given")
    h, w = skel.shape
    if np.any(seeds[:, 0] < 0) or np.any(seeds[:, 0] >= w) or np.any(seeds[:, 1] < 0) or np.any(seeds[:, 1] >= h):
        raise ValueError("seed outside the skeleton map")
    if not skel[seeds[:, 1], seeds[:, 0]].all():
        raise ValueError("every seed must lie on the skeleton")
    if center is None:
        center = mass_center(skeleton_pixels(skel))
    max_steps = cfg.max_steps if cfg.max_steps is not None else 4 * w * h

    rows, st, truncated = kernels.trace_kernel(skel.astype(np.uint8), seeds, int(max_steps))
    kps = [KeyPoint(0, float(center[0]), float(center[1]), "root", None, 0)]
    for i, (x, y, kind, parent, merge) in enumerate(rows.tolist(), start=1):
        kps.append(KeyPoint(i, float(x), float(y), _KIND_OF_CODE[kind], int(parent),
                            kps[parent].level + 1, bool(merge)))
    stats = TraceStats(*st)
    if truncated:
        raise TruncationError(f"trace exceeded max_steps={max_steps}", kps, stats)
    return kps, stats


def detect(skel, cfg: SearchConfig = SearchConfig()):
    """Geometry, seeds and trace in one call. Returns ``(keypoints, stats, geometry)``."""
    skel = np.asarray(skel).astype(bool)
    if not skel.any():
        raise EmptyInputError("empty skeleton")
    geom = skeleton_geometry(skel, cfg.alpha)
    seeds, radius = seed_points(skel, geom)
    if radius != geom.r_init:
        geom = Geometry(geom.center, geom.r_mec, radius)
    kps, stats = trace(skel, seeds, cfg, center=geom.center)
    return kps, stats, geom
