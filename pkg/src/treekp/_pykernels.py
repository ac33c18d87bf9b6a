"""Pure-Python reference kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and bit-identical output. These are the canonical definitions; the compiled
versions are a translation. Selection happens in :mod:`treekp._backend`.
"""

from __future__ import annotations

import math

import numpy as np

# (dx, dy) with y pointing down: E, NE, N, NW, W, SW, S, SE.
# Counterclockwise on screen, starting east.
NEIGHBORS = ((1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1))

SEED, BIFURCATION, END = 1, 2, 3

RNG_CHUNK = 4096


# ---------------------------------------------------------------------------
# Thinning


def _yokoi8(img, y, x):
    """8-connectivity number of pixel (y, x). 1 means the pixel is simple."""
    # x1..x8 = E, NE, N, NW, W, SW, S, SE
    nb = (
        img[y, x + 1], img[y - 1, x + 1], img[y - 1, x], img[y - 1, x - 1],
        img[y, x - 1], img[y + 1, x - 1], img[y + 1, x], img[y + 1, x + 1],
    )
    c = [1 - v for v in nb]
    total = 0
    for k in (0, 2, 4, 6):
        total += c[k] - c[k] * c[(k + 1) % 8] * c[(k + 2) % 8]
    return total


def _count8(img, y, x):
    return (
        img[y, x + 1] + img[y - 1, x + 1] + img[y - 1, x] + img[y - 1, x - 1]
        + img[y, x - 1] + img[y + 1, x - 1] + img[y + 1, x] + img[y + 1, x + 1]
    )


def _removable(img, y, x):
    return _count8(img, y, x) >= 2 and _yokoi8(img, y, x) == 1


def _zs_candidates(img, step):
    core = img[1:-1, 1:-1]
    p2 = img[:-2, 1:-1]
    p3 = img[:-2, 2:]
    p4 = img[1:-1, 2:]
    p5 = img[2:, 2:]
    p6 = img[2:, 1:-1]
    p7 = img[2:, :-2]
    p8 = img[1:-1, :-2]
    p9 = img[:-2, :-2]
    seq = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
    b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
    a = np.zeros_like(b)
    for i in range(8):
        a += (seq[i] == 0) & (seq[i + 1] == 1)
    if step == 0:
        c = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
    else:
        c = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
    return (core == 1) & (b >= 2) & (b <= 6) & (a == 1) & c


def thin_kernel(mask):
    """Zhang-Suen thinning with a topology check, then minimal 8-connectivity.

    ``mask`` is a 2-D uint8 array of 0/1. Returns a new uint8 array.
    """
    img = np.pad(np.ascontiguousarray(mask, dtype=np.uint8), 1)
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            cand = _zs_candidates(img, step)
            ys, xs = np.nonzero(cand)
            for y, x in zip((ys + 1).tolist(), (xs + 1).tolist()):
                # snapshot candidates are verified against the live image so
                # simultaneous deletions cannot disconnect or erase a component
                if _removable(img, y, x):
                    img[y, x] = 0
                    changed = True
    # drop redundant staircase pixels until the curve is 8-minimal
    changed = True
    while changed:
        changed = False
        ys, xs = np.nonzero(img)
        for y, x in zip(ys.tolist(), xs.tolist()):
            if img[y, x] and _removable(img, y, x):
                img[y, x] = 0
                changed = True
    return img[1:-1, 1:-1].copy()


# ---------------------------------------------------------------------------
# Lockstep multi-window trace


def _resolve_claims(claims):
    """Turn claims into windows; a pixel claimed twice yields one merged window.

    Window tuples are (x, y, origin, merged). The merged window sits on the
    collision pixel under the first claimant's origin.
    """
    count = {}
    for c in claims:
        count[(c[0], c[1])] = count.get((c[0], c[1]), 0) + 1
    windows = []
    merged = set()
    for x, y, origin in claims:
        if count[(x, y)] == 1:
            windows.append((x, y, origin, 0))
        elif (x, y) not in merged:
            merged.add((x, y))
            windows.append((x, y, origin, 1))
    return windows


def trace_kernel(skel, seeds, max_steps):
    """Round-synchronous trace from ``seeds`` ((n, 2) int array of x, y).

    Returns ``(rows, stats, truncated)``. ``rows`` is an (m, 5) int64 array of
    (x, y, kind, parent, merge) for every emitted key point after the root;
    row i has key-point index i + 1. ``stats`` is
    (steps_total, windows_spawned, pixels_visited).
    """
    m = np.pad(np.ascontiguousarray(skel, dtype=np.uint8) != 0, 1).astype(np.uint8)
    rows = []
    steps = spawned = visited = 0

    seed_idx = []
    for x, y in seeds.tolist():
        rows.append((x, y, SEED, 0, 0))
        seed_idx.append(len(rows))
        if m[y + 1, x + 1]:
            m[y + 1, x + 1] = 0
            visited += 1

    # padded coordinates from here on
    claims = []
    for (x, y), k in zip(seeds.tolist(), seed_idx):
        for dx, dy in NEIGHBORS:
            if m[y + 1 + dy, x + 1 + dx]:
                claims.append((x + 1 + dx, y + 1 + dy, k))
    spawned += len(claims)
    windows = _resolve_claims(claims)

    truncated = False
    while windows:
        if steps + len(windows) > max_steps:
            truncated = True
            break
        for w in windows:
            m[w[1], w[0]] = 0
        steps += len(windows)
        visited += len(windows)

        nbrs = []
        for x, y, _, _ in windows:
            nbrs.append([(x + dx, y + dy) for dx, dy in NEIGHBORS if m[y + dy, x + dx]])

        # windows dying in the same round on touching pixels met head-on
        term = [i for i, n in enumerate(nbrs) if not n]
        leader = {i: i for i in term}
        for a_pos, a in enumerate(term):
            for b in term[a_pos + 1:]:
                wa, wb = windows[a], windows[b]
                if abs(wa[0] - wb[0]) <= 1 and abs(wa[1] - wb[1]) <= 1:
                    la, lb = leader[a], leader[b]
                    if la != lb:
                        lo, hi = min(la, lb), max(la, lb)
                        for i in term:
                            if leader[i] == hi:
                                leader[i] = lo
        group_merge = {}
        for i in term:
            g = leader[i]
            group_merge[g] = group_merge.get(g, -1) + 1 + windows[i][3]

        claims = []
        for i, (x, y, origin, mflag) in enumerate(windows):
            n = nbrs[i]
            if not n:
                if leader[i] == i:
                    rows.append((x - 1, y - 1, END, origin, int(group_merge[i] > 0)))
            elif len(n) == 1 and not mflag:
                claims.append((n[0][0], n[0][1], origin))
            else:
                # a collision pixel with unexplored continuation is a merge junction
                rows.append((x - 1, y - 1, BIFURCATION, origin, mflag))
                k = len(rows)
                for nx, ny in n:
                    claims.append((nx, ny, k))
                spawned += len(n)
        windows = _resolve_claims(claims)

    out = np.array(rows, dtype=np.int64).reshape(-1, 5)
    return out, (steps, spawned, visited), truncated


# ---------------------------------------------------------------------------
# Kuhn-Munkres


def munkres_kernel(cost):
    """Minimum-cost perfect assignment on a square float64 matrix.

    Shortest augmenting path with row/column potentials, O(n^3).
    Returns an int64 array ``col`` with ``col[i]`` assigned to row ``i``.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col = np.empty(n, dtype=np.int64)
    col[p[1:] - 1] = np.arange(n)
    return col


# ---------------------------------------------------------------------------
# Diffusion-limited aggregation


class RawStream:
    """Chunked raw 64-bit draws from a numpy bit generator."""

    def __init__(self, rng):
        self.rng = rng
        self.buf = []
        self.pos = 0

    def next(self):
        if self.pos == len(self.buf):
            self.buf = self.rng.bit_generator.random_raw(RNG_CHUNK).tolist()
            self.pos = 0
        r = self.buf[self.pos]
        self.pos += 1
        return r

    def uniform(self):
        return (self.next() >> 11) * (1.0 / 9007199254740992.0)


def dla_kernel(particles, canvas, stickiness, rng):
    """Grow a DLA cluster from the canvas center; returns a uint8 grid."""
    g = grid = np.zeros((canvas, canvas), dtype=np.uint8)
    c = canvas // 2
    g[c, c] = 1
    r_max = 0.0
    limit = canvas // 2 - 2
    stream = RawStream(rng)
    steps = NEIGHBORS
    for _ in range(particles):
        r_launch = r_max + 5.0
        if r_launch + 2.0 >= limit:
            raise ValueError("canvas too small for the requested particle count")
        r_kill = min(2.0 * r_launch + 10.0, float(limit))
        r_kill2 = r_kill * r_kill
        stuck = False
        while not stuck:
            a = 2.0 * math.pi * stream.uniform()
            x = c + int(math.floor(r_launch * math.cos(a) + 0.5))
            y = c + int(math.floor(r_launch * math.sin(a) + 0.5))
            while True:
                if (g[y, x + 1] or g[y - 1, x + 1] or g[y - 1, x] or g[y - 1, x - 1]
                        or g[y, x - 1] or g[y + 1, x - 1] or g[y + 1, x] or g[y + 1, x + 1]):
                    if stream.uniform() < stickiness:
                        g[y, x] = 1
                        r = math.sqrt(float((x - c) * (x - c) + (y - c) * (y - c)))
                        if r > r_max:
                            r_max = r
                        stuck = True
                        break
                dx, dy = steps[stream.next() & 7]
                nx, ny = x + dx, y + dy
                if float((nx - c) * (nx - c) + (ny - c) * (ny - c)) > r_kill2:
                    break
                if not g[ny, nx]:
                    x, y = nx, ny
    return grid
