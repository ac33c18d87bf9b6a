"""Single-pixel skeletons and spur pruning (8-connectivity throughout)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from treekp._backend import kernels
from treekp.errors import EmptyInputError

_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))  # (dy, dx) N..NW clockwise
_K8 = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]])

DEFAULT_MIN_SPUR = 5


def thin(mask) -> np.ndarray:
    """Zhang-Suen thinning to an 8-minimal, single-pixel-wide skeleton.

    Each sub-iteration selects deletion candidates from a frozen snapshot with
    the classic Zhang-Suen rules. Candidates are then removed in raster order
    only while they are still simple points, which keeps two-pixel-thick
    diagonals and 2x2 blocks from vanishing. A final pass strips the redundant
    corner pixels that Zhang-Suen leaves on staircases, so a curve pixel has
    exactly two neighbours.
    """
    m = np.asarray(mask).astype(bool)
    if not m.any():
        raise EmptyInputError("mask has no foreground pixels")
    return kernels.thin_kernel(m.astype(np.uint8)).astype(bool)


def neighbor_count(skel) -> np.ndarray:
    s = np.asarray(skel).astype(np.uint8)
    return ndimage.convolve(s, _K8, mode="constant") * s


def crossing_number(skel) -> np.ndarray:
    """0->1 transitions around each pixel's 8-ring (zero off the foreground).

    1 marks an end, 2 a curve pixel, 3 or more a junction.
    """
    s = np.pad(np.asarray(skel).astype(np.uint8), 1)
    h, w = s.shape
    ring = [s[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx] for dy, dx in _RING]
    cn = np.zeros((h - 2, w - 2), dtype=np.int32)
    for i in range(8):
        cn += (ring[i] == 0) & (ring[(i + 1) % 8] == 1)
    return cn * s[1:-1, 1:-1]


def _open_branches(skel, cn, limit=None):
    """Walk from every end pixel to the nearest junction.

    Returns a list of pixel lists, one per open branch that reaches a
    junction. Branches that run into another end (isolated segments) are not
    reported. With ``limit``, walks stop once a branch reaches that length.
    """
    h, w = skel.shape
    ends = np.argwhere((cn == 1))
    out = []
    for y0, x0 in ends.tolist():
        path = [(y0, x0)]
        seen = {(y0, x0)}
        cur = (y0, x0)
        while True:
            if limit is not None and len(path) >= limit:
                break
            y, x = cur
            cands = []
            for dy, dx in _RING:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and skel[ny, nx] and (ny, nx) not in seen:
                    cands.append((ny, nx))
            if not cands:
                break
            if any(cn[p] >= 3 for p in cands):
                out.append(path)
                break
            if len(cands) > 1:
                # cur behaves as the branching point
                if len(path) > 1:
                    out.append(path[:-1])
                break
            cur = cands[0]
            path.append(cur)
            seen.add(cur)
    return out


def prune_spurs(skel, min_len=DEFAULT_MIN_SPUR) -> np.ndarray:
    """Delete open branches shorter than ``min_len`` pixels, repeatedly.

    A branch runs from an end pixel up to (not including) the first junction.
    Pixels that lie on junction-to-junction paths or cycles of the input are
    never removed, so later rounds only clear spurs exposed by earlier ones.
    """
    out = np.asarray(skel).astype(bool).copy()
    if min_len <= 0 or not out.any():
        return out
    cn0 = crossing_number(out)
    removable = np.zeros_like(out)
    for path in _open_branches(out, cn0):
        for p in path:
            removable[p] = True
    while True:
        cn = crossing_number(out)
        doomed = [p for path in _open_branches(out, cn, limit=min_len) if len(path) < min_len for p in path]
        doomed = [p for p in doomed if removable[p]]
        if not doomed:
            return out
        for p in doomed:
            out[p] = False
