"""Channel expansion, filtering, PCA fusion and K-means segmentation.

The image is expanded into a stack of named scalar planes (color spaces plus
filter responses), the stack is projected onto its first principal component
and the resulting plane is split into foreground and background with 1-D
K-means.

Plane order produced by :func:`expand_color_spaces`::

    gray, yuv.Y, yuv.U, yuv.V, hsv.H, hsv.S, hsv.V, rgb.R, rgb.G, rgb.B

Grayscale input gives ``in.I`` instead of the three ``rgb.*`` planes; its
luminance planes (gray, Y, hsv.V) repeat the input and the chroma planes
take their achromatic values (U = V = 0.5, H = S = 0), exactly what an RGB
image with r = g = b would produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from treekp.errors import DegenerateInputError, DimensionError, SegmentationError
from treekp.imaging import check_raster

# BT.601 luma and analog YUV chroma ranges
_WR, _WG, _WB = 0.299, 0.587, 0.114
U_MAX = 0.436
V_MAX = 0.615

COLOR_SPACES = ("gray", "yuv", "hsv", "rgb")


@dataclass(frozen=True)
class ChannelStack:
    names: tuple
    planes: np.ndarray  # (P, H, W)

    def __post_init__(self):
        planes = np.asarray(self.planes, dtype=np.float64)
        if planes.ndim != 3:
            raise DimensionError("planes must be (P, H, W)")
        if len(self.names) != planes.shape[0]:
            raise ValueError("one name per plane required")
        if len(set(self.names)) != len(self.names):
            raise ValueError("plane names must be unique")
        if not np.all(np.isfinite(planes)):
            raise ValueError("planes must be finite")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "planes", planes)

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    def __len__(self) -> int:
        return len(self.names)

    def plane(self, name: str) -> np.ndarray:
        return self.planes[self.names.index(name)]

    def extend(self, names, planes) -> "ChannelStack":
        if not len(names):
            return self
        return ChannelStack(self.names + tuple(names), np.concatenate([self.planes, np.asarray(planes)]))


# ---------------------------------------------------------------------------
# Color spaces


def rgb_to_yuv(r, g, b):
    """Analog YUV from luma differences; U and V shifted/scaled into [0, 1]."""
    y = _WR * r + _WG * g + _WB * b
    u = U_MAX * (b - y) / (1.0 - _WB)
    v = V_MAX * (r - y) / (1.0 - _WR)
    return y, u / (2 * U_MAX) + 0.5, v / (2 * V_MAX) + 0.5


def yuv_to_rgb(y, u, v):
    u = (np.asarray(u) - 0.5) * 2 * U_MAX
    v = (np.asarray(v) - 0.5) * 2 * V_MAX
    b = y + u * (1.0 - _WB) / U_MAX
    r = y + v * (1.0 - _WR) / V_MAX
    g = (y - _WR * r - _WB * b) / _WG
    return r, g, b


def rgb_to_hsv(r, g, b):
    """Vectorised HSV with H in [0, 1) (fraction of a turn)."""
    r, g, b = (np.asarray(c, dtype=np.float64) for c in (r, g, b))
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn
    v = mx
    s = np.divide(delta, mx, out=np.zeros_like(mx), where=mx > 0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        mx == r,
        ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, h / 6.0, 0.0) % 1.0
    return h, s, v


def hsv_to_rgb(h, s, v):
    h, s, v = (np.asarray(c, dtype=np.float64) for c in (h, s, v))
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(int) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return r, g, b


def expand_color_spaces(img, spaces=COLOR_SPACES) -> ChannelStack:
    """Expand an image into color-space planes (order in the module docstring)."""
    arr = check_raster(img)
    unknown = set(spaces) - set(COLOR_SPACES)
    if unknown:
        raise ValueError(f"unknown color spaces: {sorted(unknown)}")
    if arr.ndim == 2:
        r = g = b = arr
    else:
        r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    names, planes = [], []
    y, u, v = rgb_to_yuv(r, g, b)
    if arr.ndim == 2:
        # exact achromatic values; the formulas leave ~1e-17 residue in U and V
        y = arr
        u = np.full_like(arr, 0.5)
        v = np.full_like(arr, 0.5)
    if "gray" in spaces:
        names.append("gray")
        planes.append(y)
    if "yuv" in spaces:
        names += ["yuv.Y", "yuv.U", "yuv.V"]
        planes += [y, u, v]
    if "hsv" in spaces:
        h, s, val = rgb_to_hsv(r, g, b)
        names += ["hsv.H", "hsv.S", "hsv.V"]
        planes += [h, s, val]
    if "rgb" in spaces:
        if arr.ndim == 2:
            names.append("in.I")
            planes.append(arr)
        else:
            names += ["rgb.R", "rgb.G", "rgb.B"]
            planes += [r, g, b]
    return ChannelStack(tuple(names), np.stack([np.asarray(p, dtype=np.float64) for p in planes]))


# ---------------------------------------------------------------------------
# Filter bank

LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

GABOR_SIGMA = 2.0
GABOR_WAVELENGTH = 4.0
GABOR_ORIENTATIONS = (0, 45, 90, 135)


def gabor_kernel(theta_deg, sigma=GABOR_SIGMA, wavelength=GABOR_WAVELENGTH) -> np.ndarray:
    """Real (even) Gabor kernel, isotropic envelope, made zero-mean.

    Size is 2*ceil(3*sigma)+1 (13x13 at the default sigma).
    """
    half = int(math.ceil(3 * sigma))
    ys, xs = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    t = math.radians(theta_deg)
    xr = xs * math.cos(t) + ys * math.sin(t)
    k = np.exp(-(xs ** 2 + ys ** 2) / (2 * sigma ** 2)) * np.cos(2 * math.pi * xr / wavelength)
    return k - k.mean()


def convolve2d(plane, kernel) -> np.ndarray:
    """2-D convolution (kernel flipped) with replicate borders, same size output."""
    plane = np.asarray(plane, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape[0] > plane.shape[0] or kernel.shape[1] > plane.shape[1]:
        raise DimensionError(f"kernel {kernel.shape} larger than image {plane.shape}")
    if kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise DimensionError("kernel sides must be odd")
    if kernel.size <= 25:
        return ndimage.convolve(plane, kernel, mode="nearest")
    ry, rx = kernel.shape[0] // 2, kernel.shape[1] // 2
    padded = np.pad(plane, ((ry, ry), (rx, rx)), mode="edge")
    return signal.fftconvolve(padded, kernel, mode="valid")


def filter_response(plane, name: str) -> np.ndarray:
    """Raw (unscaled) response of one filter-bank member."""
    if name == "laplacian":
        return convolve2d(plane, LAPLACIAN)
    if name == "sobel":
        return np.hypot(convolve2d(plane, SOBEL_X), convolve2d(plane, SOBEL_Y))
    if name.startswith("gabor"):
        return convolve2d(plane, gabor_kernel(float(name[5:])))
    raise ValueError(f"unknown filter {name!r}")


RESCALE_FLOOR = 1e-9


def rescale01(plane) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant plane maps to zeros.

    Spreads below ``RESCALE_FLOOR`` count as constant so that round-off in
    filter responses (FFT convolution of a flat image) is not blown up.
    """
    plane = np.asarray(plane, dtype=np.float64)
    lo, hi = plane.min(), plane.max()
    if hi - lo <= RESCALE_FLOOR:
        return np.zeros_like(plane)
    return (plane - lo) / (hi - lo)


@dataclass(frozen=True)
class FilterBankConfig:
    filters: tuple = ("laplacian", "sobel") + tuple(f"gabor{a}" for a in GABOR_ORIENTATIONS)
    sources: tuple = ("gray",)


def apply_filter_bank(stack: ChannelStack, bank: FilterBankConfig = FilterBankConfig()) -> ChannelStack:
    """Append one rescaled plane per (filter, source plane) pair, named ``filter(source)``."""
    if len(stack) == 0:
        raise ValueError("empty channel stack")
    names, planes = [], []
    for src in bank.sources:
        plane = stack.plane(src)
        for f in bank.filters:
            names.append(f"{f}({src})")
            planes.append(rescale01(filter_response(plane, f)))
    return stack.extend(names, planes)


# ---------------------------------------------------------------------------
# PCA fusion


def principal_projection(stack: ChannelStack):
    """First principal component of the per-pixel plane vectors.

    Returns ``(projection, eigenvalue, loading)``: the unscaled centred
    projection as an (H, W) array, the largest covariance eigenvalue and the
    loading vector in the stack's plane order (largest-magnitude entry
    positive).
    """
    if len(stack) < 2:
        raise ValueError("PCA fusion needs at least two planes")
    x = stack.planes.reshape(len(stack), -1)
    if x.shape[1] < 2:
        raise ValueError("PCA fusion needs at least two pixels")
    # canonical plane order makes the result independent of input order
    order = sorted(range(len(stack)), key=lambda i: x[i].tobytes())
    xs = x[order]
    xc = xs - xs.mean(axis=1, keepdims=True)
    cov = xc @ xc.T / (xc.shape[1] - 1)
    if not np.any(np.diag(cov) > 0):
        raise DegenerateInputError("all planes are constant")
    evals, evecs = np.linalg.eigh(cov)
    vec = evecs[:, -1]
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    proj = (vec @ xc).reshape(stack.height, stack.width)
    loading = np.empty_like(vec)
    loading[order] = vec
    return proj, float(evals[-1]), loading


def fuse_pca(stack: ChannelStack) -> np.ndarray:
    """Fuse the stack to one [0, 1] plane along its first principal component."""
    proj, _, _ = principal_projection(stack)
    return rescale01(proj)


# ---------------------------------------------------------------------------
# K-means segmentation

FG_RULES = ("darker", "brighter", "largest", "smallest")


def kmeans_1d(values, k, seed=0, tol=1e-6, max_iter=100, method="exact"):
    """1-D K-means. Returns ``(centroids, labels)``, centroids ascending.

    ``method="exact"`` finds the partition with the smallest within-cluster
    sum of squares (optimal clusters are runs of the sorted values; dynamic
    programming over split points), then labels every value by its nearest
    centroid. ``method="lloyd"`` runs Lloyd's iterations from a
    farthest-point initialisation whose first centroid is drawn with
    ``numpy.random.default_rng(seed)``; it can stop in a local optimum.
    Fewer than ``k`` distinct values give fewer centroids.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if k < 1 or vals.size == 0:
        raise ValueError("need k >= 1 and at least one value")
    uniq = np.unique(vals)
    if uniq.size <= k:
        return uniq, np.searchsorted(uniq, vals)
    if method == "exact":
        cents = _exact_centroids(np.sort(vals), k)
    elif method == "lloyd":
        cents = _lloyd_centroids(vals, k, seed, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    labels = _nearest(vals, cents)
    counts = np.bincount(labels, minlength=k)
    sums = np.bincount(labels, weights=vals, minlength=k)
    cents = np.where(counts > 0, sums / np.maximum(counts, 1), cents)
    return cents, labels


def _exact_centroids(v, k):
    n = v.size
    s1 = np.concatenate([[0.0], np.cumsum(v)])
    s2 = np.concatenate([[0.0], np.cumsum(v * v)])

    def cost(i, j):
        # SSE of v[i:j] for index arrays i < j
        d = s1[j] - s1[i]
        return np.maximum((s2[j] - s2[i]) - d * d / (j - i), 0.0)

    prev = np.full(n + 1, np.inf)
    prev[1:] = cost(np.zeros(n, dtype=np.int64), np.arange(1, n + 1))
    splits = []
    for c in range(2, k + 1):
        cur = np.full(n + 1, np.inf)
        arg = np.zeros(n + 1, dtype=np.int64)
        if c == k:
            i = np.arange(c - 1, n)
            tot = prev[i] + cost(i, np.full(i.size, n))
            arg[n] = i[int(np.argmin(tot))]
        else:
            # the best split point is monotone in j: divide and conquer
            stack = [(c, n, c - 1, n - 1)]
            while stack:
                lo, hi, olo, ohi = stack.pop()
                if lo > hi:
                    continue
                mid = (lo + hi) // 2
                i = np.arange(olo, min(ohi, mid - 1) + 1)
                tot = prev[i] + cost(i, np.full(i.size, mid))
                best = int(np.argmin(tot))
                cur[mid], arg[mid] = tot[best], i[best]
                stack.append((lo, mid - 1, olo, i[best]))
                stack.append((mid + 1, hi, i[best], ohi))
        splits.append(arg)
        prev = cur
    bounds = [n]
    for arg in reversed(splits):
        bounds.append(int(arg[bounds[-1]]))
    bounds.append(0)
    bounds = bounds[::-1]
    return np.array([v[bounds[t]:bounds[t + 1]].mean() for t in range(k)])


def _lloyd_centroids(vals, k, seed, tol, max_iter):
    rng = np.random.default_rng(seed)
    cents = [vals[rng.integers(vals.size)]]
    dist = np.abs(vals - cents[0])
    for _ in range(1, k):
        cents.append(vals[int(np.argmax(dist))])
        dist = np.minimum(dist, np.abs(vals - cents[-1]))
    cents = np.sort(np.array(cents))
    for _ in range(max_iter):
        labels = _nearest(vals, cents)
        sums = np.bincount(labels, weights=vals, minlength=k)
        counts = np.bincount(labels, minlength=k)
        new = np.sort(np.where(counts > 0, sums / np.maximum(counts, 1), cents))
        moved = np.max(np.abs(new - cents))
        cents = new
        if moved < tol:
            break
    return cents


def _nearest(vals, cents):
    # ties go to the lower centroid
    mids = (cents[:-1] + cents[1:]) / 2.0
    return np.searchsorted(mids, vals, side="left")


def segment_kmeans(field, k=2, fg_rule="darker", seed=0, method="exact") -> np.ndarray:
    """Boolean foreground mask from 1-D K-means on the fused plane."""
    field = np.asarray(field, dtype=np.float64)
    if k < 2:
        raise ValueError("k must be >= 2")
    if fg_rule not in FG_RULES:
        raise ValueError(f"fg_rule must be one of {FG_RULES}")
    if field.size == 0 or field.max() == field.min():
        raise DegenerateInputError("constant field cannot be segmented")
    cents, labels = kmeans_1d(field.ravel(), k, seed=seed, method=method)
    counts = np.bincount(labels, minlength=len(cents))
    if fg_rule == "darker":
        fg = 0
    elif fg_rule == "brighter":
        fg = len(cents) - 1
    elif fg_rule == "largest":
        fg = int(np.argmax(counts))
    else:
        fg = int(np.argmin(np.where(counts > 0, counts, np.iinfo(np.int64).max)))
    mask = (labels == fg).reshape(field.shape)
    if not mask.any():
        raise SegmentationError("foreground cluster is empty")
    return mask
