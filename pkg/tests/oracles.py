"""Independent reference implementations used to check the library.

Written for clarity rather than speed and without importing the code
under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# assignment


def brute_force_assignment(cost):
    """Minimum total cost over all injections of the smaller side into the larger."""
    c = np.asarray(cost, dtype=np.float64)
    n, m = c.shape
    if n == 0 or m == 0:
        return 0.0
    if n <= m:
        return min(sum(c[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
    return min(sum(c[p[j], j] for j in range(m)) for p in itertools.permutations(range(n), m))


# ---------------------------------------------------------------------------
# image processing


def naive_convolve(plane, kernel):
    """Textbook 2-D convolution (flipped kernel) with replicated borders."""
    h, w = plane.shape
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for j in range(kh):
                for i in range(kw):
                    sy = min(max(y + ry - j, 0), h - 1)
                    sx = min(max(x + rx - i, 0), w - 1)
                    acc += kernel[j, i] * plane[sy, sx]
            out[y, x] = acc
    return out


def rgb_to_hsv_pixel(r, g, b):
    mx, mn = max(r, g, b), min(r, g, b)
    v = mx
    s = 0.0 if mx == 0 else (mx - mn) / mx
    if mx == mn:
        h = 0.0
    elif mx == r:
        h = ((g - b) / (mx - mn)) % 6.0
    elif mx == g:
        h = (b - r) / (mx - mn) + 2.0
    else:
        h = (r - g) / (mx - mn) + 4.0
    return h / 6.0, s, v


def rgb_to_yuv_pixel(r, g, b):
    """BT.601 analog YUV with U, V mapped from [-Umax, Umax] / [-Vmax, Vmax] onto [0, 1]."""
    y = 0.299 * r + 0.587 * g + 0.114 * b
    u = 0.436 / 0.886 * (b - y)
    v = 0.615 / 0.701 * (r - y)
    return y, u / 0.872 + 0.5, v / 1.23 + 0.5


def pca_projection(planes):
    """First principal component via a general (non-symmetric) eigen solver."""
    x = np.array([p.ravel() for p in planes], dtype=np.float64)
    n = x.shape[1]
    means = [sum(row) / n for row in x]
    k = len(planes)
    cov = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            cov[a, b] = sum((x[a, t] - means[a]) * (x[b, t] - means[b]) for t in range(n)) / (n - 1)
    evals, evecs = np.linalg.eig(cov)
    top = int(np.argmax(evals.real))
    vec = evecs[:, top].real
    vec = vec / np.linalg.norm(vec)
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    proj = vec @ (x - np.array(means)[:, None])
    return proj.reshape(planes[0].shape), float(evals.real[top])


def kmeans_1d_optimal_sse(values, k):
    """Exact minimum within-cluster sum of squares for 1-D data by dynamic programming."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    pre = np.concatenate([[0.0], np.cumsum(v)])
    pre2 = np.concatenate([[0.0], np.cumsum(v * v)])

    def sse(i, j):  # v[i:j]
        s = pre[j] - pre[i]
        return (pre2[j] - pre2[i]) - s * s / (j - i)

    inf = float("inf")
    dp = [[inf] * (n + 1) for _ in range(k + 1)]
    dp[0][0] = 0.0
    for c in range(1, k + 1):
        for j in range(1, n + 1):
            for i in range(c - 1, j):
                if dp[c - 1][i] < inf:
                    dp[c][j] = min(dp[c][j], dp[c - 1][i] + sse(i, j))
    return dp[k][n]


def components8(mask):
    """Number of 8-connected foreground components by flood fill."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    seen = np.zeros_like(m)
    count = 0
    for y in range(h):
        for x in range(w):
            if m[y, x] and not seen[y, x]:
                count += 1
                stack = [(y, x)]
                seen[y, x] = True
                while stack:
                    cy, cx = stack.pop()
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if 0 <= ny < h and 0 <= nx < w and m[ny, nx] and not seen[ny, nx]:
                                seen[ny, nx] = True
                                stack.append((ny, nx))
    return count


# ---------------------------------------------------------------------------
# lockstep trace

# neighbour scan order: E, NE, N, NW, W, SW, S, SE (y down)
SCAN = ((1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1))


def lockstep_trace(skel, seeds):
    """Reference lockstep trace. Returns (rows, (steps, spawned, visited)).

    rows are (x, y, kind, parent_index, merge) with kind in
    {"seed", "bifurcation", "end"}; row i is key point i + 1.

    Rules: all windows of a round first erase their pixels, then each looks
    at its remaining neighbours. Claims on the same pixel fuse into one
    window (first claimant's origin) flagged as merged. A merged window with
    neighbours left branches (merge bifurcation); with none it ends (merge
    end). Dying windows that touch each other form one head-on group that
    emits a single end at its first member, flagged merge if the group has
    more than one window or contains a merged one.
    """
    on = {(x, y) for y, x in zip(*np.nonzero(np.asarray(skel)))}
    rows = []
    steps = spawned = visited = 0

    def fuse(claims):
        order, members = [], {}
        for px, origin in claims:
            if px not in members:
                order.append(px)
                members[px] = []
            members[px].append(origin)
        return [(px, members[px][0], len(members[px]) > 1) for px in order]

    claims = []
    seed_ids = []
    for x, y in seeds:
        rows.append((x, y, "seed", 0, False))
        seed_ids.append(len(rows))
        if (x, y) in on:
            on.discard((x, y))
            visited += 1
    for (x, y), sid in zip(seeds, seed_ids):
        for dx, dy in SCAN:
            if (x + dx, y + dy) in on:
                claims.append(((x + dx, y + dy), sid))
    spawned += len(claims)
    windows = fuse(claims)

    while windows:
        for px, _, _ in windows:
            on.discard(px)
        steps += len(windows)
        visited += len(windows)
        free = [[(px[0] + dx, px[1] + dy) for dx, dy in SCAN if (px[0] + dx, px[1] + dy) in on]
                for px, _, _ in windows]

        dying = [i for i, f in enumerate(free) if not f]
        # connected groups of touching dying windows
        group_of = {}
        for i in dying:
            if i in group_of:
                continue
            group_of[i] = i
            todo = [i]
            while todo:
                a = todo.pop()
                for b in dying:
                    if b not in group_of:
                        pa, pb = windows[a][0], windows[b][0]
                        if abs(pa[0] - pb[0]) <= 1 and abs(pa[1] - pb[1]) <= 1:
                            group_of[b] = i
                            todo.append(b)

        claims = []
        for i, (px, origin, merged) in enumerate(windows):
            f = free[i]
            if not f:
                if group_of[i] == i:
                    group = [j for j in dying if group_of[j] == i]
                    flag = len(group) > 1 or any(windows[j][2] for j in group)
                    rows.append((px[0], px[1], "end", origin, flag))
            elif len(f) == 1 and not merged:
                claims.append((f[0], origin))
            else:
                rows.append((px[0], px[1], "bifurcation", origin, merged))
                me = len(rows)
                for q in f:
                    claims.append((q, me))
                spawned += len(f)
        windows = fuse(claims)
    return rows, (steps, spawned, visited)


def rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])
