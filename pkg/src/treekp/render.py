"""Overlay images for key points and alignments."""

from __future__ import annotations

import numpy as np

KIND_COLORS = {
    "root": (1.0, 0.85, 0.0),
    "seed": (0.0, 0.75, 0.0),
    "bifurcation": (0.0, 0.3, 1.0),
    "end": (0.9, 0.0, 0.0),
}


def _rgb_base(img, shape):
    if img is None:
        return np.ones(shape[:2] + (3,))
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    # fade so markers stand out
    return 0.6 + 0.4 * img


def _dot(out, x, y, color, r=1):
    h, w = out.shape[:2]
    xi, yi = int(round(x)), int(round(y))
    out[max(yi - r, 0):min(yi + r + 1, h), max(xi - r, 0):min(xi + r + 1, w)] = color


def _line(out, p, q, color):
    n = int(max(abs(q[0] - p[0]), abs(q[1] - p[1]))) + 1
    h, w = out.shape[:2]
    for t in np.linspace(0.0, 1.0, n + 1):
        x = int(round(p[0] + t * (q[0] - p[0])))
        y = int(round(p[1] + t * (q[1] - p[1])))
        if 0 <= x < w and 0 <= y < h:
            out[y, x] = color


def keypoint_overlay(g, img=None, skel=None) -> np.ndarray:
    """Seeds green, bifurcations blue, ends red, root yellow; skeleton dark grey."""
    out = _rgb_base(img, (g.height, g.width))
    if skel is not None:
        out[np.asarray(skel, dtype=bool)] = (0.35, 0.35, 0.35)
    for n in g.nodes:
        _dot(out, n.x, n.y, KIND_COLORS[n.kind], r=2 if n.kind == "root" else 1)
    return out


def match_overlay(ref, projected, pairs, tau, shape=None) -> np.ndarray:
    """Reference points black, aligned test points magenta; pairs green within ``tau``, else red."""
    ref_pos = ref.positions()
    h, w = shape if shape is not None else (ref.height, ref.width)
    out = np.ones((h, w, 3))
    for i, j in pairs:
        p, q = ref_pos[i], projected[j]
        ok = np.hypot(*(p - q)) <= tau
        _line(out, p, q, (0.0, 0.7, 0.0) if ok else (0.9, 0.0, 0.0))
    for x, y in projected:
        _dot(out, x, y, (0.8, 0.0, 0.8))
    for x, y in ref_pos:
        _dot(out, x, y, (0.0, 0.0, 0.0))
    return out
