# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Bit-identical twins of ``treekp._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, floor, M_PI
from libc.stdint cimport uint64_t, int64_t, uint8_t

cnp.import_array()

DEF RNG_CHUNK = 4096

cdef int NDX[8]
cdef int NDY[8]
NDX[:] = [1, 1, 0, -1, -1, -1, 0, 1]
NDY[:] = [0, -1, -1, -1, 0, 1, 1, 1]

cdef enum:
    SEED = 1
    BIFURCATION = 2
    END = 3


# ---------------------------------------------------------------------------
# Thinning

cdef inline int _yokoi8(uint8_t[:, ::1] img, Py_ssize_t y, Py_ssize_t x) nogil:
    cdef int c[8]
    c[0] = 1 - img[y, x + 1]
    c[1] = 1 - img[y - 1, x + 1]
    c[2] = 1 - img[y - 1, x]
    c[3] = 1 - img[y - 1, x - 1]
    c[4] = 1 - img[y, x - 1]
    c[5] = 1 - img[y + 1, x - 1]
    c[6] = 1 - img[y + 1, x]
    c[7] = 1 - img[y + 1, x + 1]
    cdef int total = 0
    cdef int k
    for k in range(0, 8, 2):
        total += c[k] - c[k] * c[(k + 1) % 8] * c[(k + 2) % 8]
    return total


cdef inline int _count8(uint8_t[:, ::1] img, Py_ssize_t y, Py_ssize_t x) nogil:
    return (img[y, x + 1] + img[y - 1, x + 1] + img[y - 1, x] + img[y - 1, x - 1]
            + img[y, x - 1] + img[y + 1, x - 1] + img[y + 1, x] + img[y + 1, x + 1])


cdef inline bint _removable(uint8_t[:, ::1] img, Py_ssize_t y, Py_ssize_t x) nogil:
    return _count8(img, y, x) >= 2 and _yokoi8(img, y, x) == 1


cdef inline bint _zs_candidate(uint8_t[:, ::1] s, Py_ssize_t y, Py_ssize_t x, int step) nogil:
    if s[y, x] != 1:
        return False
    cdef int p[9]
    p[0] = s[y - 1, x]
    p[1] = s[y - 1, x + 1]
    p[2] = s[y, x + 1]
    p[3] = s[y + 1, x + 1]
    p[4] = s[y + 1, x]
    p[5] = s[y + 1, x - 1]
    p[6] = s[y, x - 1]
    p[7] = s[y - 1, x - 1]
    p[8] = p[0]
    cdef int b = 0, a = 0, i
    for i in range(8):
        b += p[i]
        if p[i] == 0 and p[i + 1] == 1:
            a += 1
    if b < 2 or b > 6 or a != 1:
        return False
    # p2=p[0], p4=p[2], p6=p[4], p8=p[6]
    if step == 0:
        return p[0] * p[2] * p[4] == 0 and p[2] * p[4] * p[6] == 0
    return p[0] * p[2] * p[6] == 0 and p[0] * p[4] * p[6] == 0


def thin_kernel(mask):
    cdef cnp.ndarray[uint8_t, ndim=2] arr = np.pad(np.ascontiguousarray(mask, dtype=np.uint8), 1)
    cdef uint8_t[:, ::1] img = arr
    cdef cnp.ndarray[uint8_t, ndim=2] snap_arr = np.empty_like(arr)
    cdef uint8_t[:, ::1] snap = snap_arr
    cdef cnp.ndarray[uint8_t, ndim=2] cand_arr = np.zeros_like(arr)
    cdef uint8_t[:, ::1] cand = cand_arr
    cdef Py_ssize_t h = arr.shape[0], w = arr.shape[1], y, x
    cdef int step
    cdef bint changed = True
    with nogil:
        while changed:
            changed = False
            for step in range(2):
                snap[:, :] = img
                for y in range(1, h - 1):
                    for x in range(1, w - 1):
                        cand[y, x] = _zs_candidate(snap, y, x, step)
                for y in range(1, h - 1):
                    for x in range(1, w - 1):
                        if cand[y, x] and _removable(img, y, x):
                            img[y, x] = 0
                            changed = True
        changed = True
        while changed:
            changed = False
            for y in range(1, h - 1):
                for x in range(1, w - 1):
                    if img[y, x] and _removable(img, y, x):
                        img[y, x] = 0
                        changed = True
    return arr[1:-1, 1:-1].copy()


# ---------------------------------------------------------------------------
# Lockstep multi-window trace

cdef Py_ssize_t _resolve(int[:, ::1] count,
                         int64_t[::1] cx, int64_t[::1] cy, int64_t[::1] corig, Py_ssize_t nc,
                         int64_t[::1] wx, int64_t[::1] wy, int64_t[::1] worig, uint8_t[::1] wm):
    cdef Py_ssize_t i, nw = 0
    cdef int64_t x, y
    for i in range(nc):
        count[cy[i], cx[i]] += 1
    for i in range(nc):
        x = cx[i]
        y = cy[i]
        if count[y, x] == 0:
            continue
        wx[nw] = x
        wy[nw] = y
        worig[nw] = corig[i]
        if count[y, x] == 1:
            wm[nw] = 0
        else:
            # first claimant keeps a merged window; 0 skips later claimants
            wm[nw] = 1
            count[y, x] = 0
        nw += 1
    for i in range(nc):
        count[cy[i], cx[i]] = 0
    return nw


def trace_kernel(skel, seeds, long long max_steps):
    cdef cnp.ndarray[uint8_t, ndim=2] marr = np.pad(
        np.ascontiguousarray(skel, dtype=np.uint8) != 0, 1).astype(np.uint8)
    cdef uint8_t[:, ::1] m = marr
    cdef int[:, ::1] count = np.zeros((marr.shape[0], marr.shape[1]), dtype=np.intc)
    cdef int64_t[:, ::1] sd = np.ascontiguousarray(seeds, dtype=np.int64).reshape(-1, 2)
    cdef Py_ssize_t ns = sd.shape[0]
    cdef Py_ssize_t cap = 8 * (int(np.count_nonzero(marr)) + ns) + 8
    cdef int64_t[::1] wx = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] wy = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] wo = np.empty(cap, dtype=np.int64)
    cdef uint8_t[::1] wm = np.zeros(cap, dtype=np.uint8)
    cdef int64_t[::1] cx = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] cy = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] co = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] nbx = np.empty(8 * cap, dtype=np.int64)
    cdef int64_t[::1] nby = np.empty(8 * cap, dtype=np.int64)
    cdef int64_t[::1] nbn = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] leader = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] gsize = np.zeros(cap, dtype=np.int64)
    cdef int64_t[::1] term = np.empty(cap, dtype=np.int64)
    cdef list rows = []
    cdef long long steps = 0, spawned = 0
    cdef Py_ssize_t visited = 0
    cdef Py_ssize_t i, j, k, a, b, nw, nc, nt, la, lb, lo, hi, kp
    cdef int64_t x, y, nx, ny
    cdef int d

    for i in range(ns):
        rows.append((sd[i, 0], sd[i, 1], SEED, 0, 0))
        if m[sd[i, 1] + 1, sd[i, 0] + 1]:
            m[sd[i, 1] + 1, sd[i, 0] + 1] = 0
            visited += 1
    nc = 0
    for i in range(ns):
        x = sd[i, 0] + 1
        y = sd[i, 1] + 1
        for d in range(8):
            if m[y + NDY[d], x + NDX[d]]:
                cx[nc] = x + NDX[d]
                cy[nc] = y + NDY[d]
                co[nc] = i + 1
                nc += 1
    spawned += nc
    nw = _resolve(count, cx, cy, co, nc, wx, wy, wo, wm)

    truncated = False
    while nw > 0:
        if steps + nw > max_steps:
            truncated = True
            break
        for i in range(nw):
            m[wy[i], wx[i]] = 0
        steps += nw
        visited += nw

        nt = 0
        for i in range(nw):
            k = 0
            for d in range(8):
                if m[wy[i] + NDY[d], wx[i] + NDX[d]]:
                    nbx[8 * i + k] = wx[i] + NDX[d]
                    nby[8 * i + k] = wy[i] + NDY[d]
                    k += 1
            nbn[i] = k
            if k == 0:
                term[nt] = i
                leader[i] = i
                nt += 1
        for a in range(nt):
            for b in range(a + 1, nt):
                i = term[a]
                j = term[b]
                if abs(wx[i] - wx[j]) <= 1 and abs(wy[i] - wy[j]) <= 1:
                    la = leader[i]
                    lb = leader[j]
                    if la != lb:
                        lo = la if la < lb else lb
                        hi = lb if la < lb else la
                        for k in range(nt):
                            if leader[term[k]] == hi:
                                leader[term[k]] = lo
        for a in range(nt):
            gsize[leader[term[a]]] += 1 + wm[term[a]]

        nc = 0
        for i in range(nw):
            k = nbn[i]
            if k == 0:
                if leader[i] == i:
                    rows.append((wx[i] - 1, wy[i] - 1, END, wo[i], 1 if gsize[i] > 1 else 0))
            elif k == 1 and not wm[i]:
                cx[nc] = nbx[8 * i]
                cy[nc] = nby[8 * i]
                co[nc] = wo[i]
                nc += 1
            else:
                rows.append((wx[i] - 1, wy[i] - 1, BIFURCATION, wo[i], wm[i]))
                kp = len(rows)
                for j in range(k):
                    cx[nc] = nbx[8 * i + j]
                    cy[nc] = nby[8 * i + j]
                    co[nc] = kp
                    nc += 1
                spawned += k
        for a in range(nt):
            gsize[leader[term[a]]] = 0
        nw = _resolve(count, cx, cy, co, nc, wx, wy, wo, wm)

    out = np.array(rows, dtype=np.int64).reshape(-1, 5)
    return out, (int(steps), int(spawned), int(visited)), truncated


# ---------------------------------------------------------------------------
# Kuhn-Munkres

def munkres_kernel(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef int64_t[::1] p = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] way = np.zeros(n + 1, dtype=np.int64)
    cdef uint8_t[::1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, inf = float("inf")
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = inf
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = inf
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
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
    pa = np.asarray(p)
    col[pa[1:] - 1] = np.arange(n)
    return col


# ---------------------------------------------------------------------------
# Diffusion-limited aggregation

cdef class _Stream:
    cdef object rng
    cdef uint64_t[::1] buf
    cdef Py_ssize_t pos

    def __cinit__(self, rng):
        self.rng = rng
        self.buf = np.empty(0, dtype=np.uint64)
        self.pos = 0

    cdef inline uint64_t next(self):
        if self.pos == self.buf.shape[0]:
            self.buf = self.rng.bit_generator.random_raw(RNG_CHUNK)
            self.pos = 0
        cdef uint64_t r = self.buf[self.pos]
        self.pos += 1
        return r

    cdef inline double uniform(self):
        return <double>(self.next() >> 11) * (1.0 / 9007199254740992.0)


def dla_kernel(long particles, long canvas, double stickiness, rng):
    grid = np.zeros((canvas, canvas), dtype=np.uint8)
    cdef uint8_t[:, ::1] g = grid
    cdef long c = canvas // 2
    cdef double r_max = 0.0, r_launch, r_kill, r_kill2, a, r
    cdef long limit = canvas // 2 - 2
    cdef _Stream stream = _Stream(rng)
    cdef long x, y, nx, ny, it
    cdef int d
    cdef bint stuck
    g[c, c] = 1
    for it in range(particles):
        r_launch = r_max + 5.0
        if r_launch + 2.0 >= limit:
            raise ValueError("canvas too small for the requested particle count")
        r_kill = 2.0 * r_launch + 10.0
        if r_kill > <double>limit:
            r_kill = <double>limit
        r_kill2 = r_kill * r_kill
        stuck = False
        while not stuck:
            a = 2.0 * M_PI * stream.uniform()
            x = c + <long>floor(r_launch * cos(a) + 0.5)
            y = c + <long>floor(r_launch * sin(a) + 0.5)
            while True:
                if (g[y, x + 1] or g[y - 1, x + 1] or g[y - 1, x] or g[y - 1, x - 1]
                        or g[y, x - 1] or g[y + 1, x - 1] or g[y + 1, x] or g[y + 1, x + 1]):
                    if stream.uniform() < stickiness:
                        g[y, x] = 1
                        r = sqrt(<double>((x - c) * (x - c) + (y - c) * (y - c)))
                        if r > r_max:
                            r_max = r
                        stuck = True
                        break
                d = <int>(stream.next() & 7)
                nx = x + NDX[d]
                ny = y + NDY[d]
                if <double>((nx - c) * (nx - c) + (ny - c) * (ny - c)) > r_kill2:
                    break
                if not g[ny, nx]:
                    x = nx
                    y = ny
    return grid
