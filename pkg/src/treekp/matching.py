"""Weighted node distances, weight learning and optimal assignment.

Node features are grouped into blocks. For a numeric block of dimension k
the distance between two normalized rows u, v is

    d_E   = min(1, |u - v| / sqrt(k))
    d_cos = (1 - cos(u, v)) / 2          (0 if either vector is zero)

and a categorical block contributes its 0/1 mismatch indicator to both
terms. The node distance is the weighted sum of (d_E + d_cos) over blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from treekp._backend import kernels
from treekp.errors import InsufficientDataError, ShapeError
from treekp.graph import COL, FEATURE_NAMES

# block name -> (feature columns, categorical?)
FEATURE_BLOCKS = {
    "position": (("X", "Y"), False),
    "level": (("Level",), False),
    "angle": (("Angle",), False),
    "rel_length": (("RelativeLength",), False),
    "type": (("Type",), True),
    "children": (("ChildCount", "ChildLevel"), False),
    "parent_offset": (("DistToParentX", "DistToParentY"), False),
    "parent_type": (("ParentType",), True),
    "siblings": (("SiblingCount",), False),
    "dist_root": (("DistToRoot",), False),
    "index": (("Index",), False),
}
BLOCK_NAMES = tuple(FEATURE_BLOCKS)
_BLOCK_COLS = {b: [COL[c] for c in cols] for b, (cols, _) in FEATURE_BLOCKS.items()}


@dataclass(frozen=True)
class FeatureWeights:
    """Nonnegative per-block weights summing to one, keyed by block name."""

    values: tuple  # aligned with BLOCK_NAMES

    def __post_init__(self):
        w = np.asarray(self.values, dtype=np.float64)
        if w.shape != (len(BLOCK_NAMES),):
            raise ShapeError(f"expected {len(BLOCK_NAMES)} weights, got {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not math.isclose(float(w.sum()), 1.0, abs_tol=1e-9):
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def as_dict(self) -> dict:
        return dict(zip(BLOCK_NAMES, self.values))

    @classmethod
    def uniform(cls) -> "FeatureWeights":
        return cls(tuple([1.0 / len(BLOCK_NAMES)] * len(BLOCK_NAMES)))

    @classmethod
    def from_raw(cls, raw) -> "FeatureWeights":
        """Normalize any nonnegative vector (or name->value mapping) to weights."""
        if isinstance(raw, dict):
            unknown = set(raw) - set(BLOCK_NAMES)
            if unknown:
                raise KeyError(f"unknown feature blocks: {sorted(unknown)}")
            raw = [float(raw.get(b, 0.0)) for b in BLOCK_NAMES]
        w = np.asarray(raw, dtype=np.float64)
        if w.shape != (len(BLOCK_NAMES),) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("raw weights need one nonnegative entry per block and a positive sum")
        return cls(tuple((w / w.sum()).tolist()))

    def dumps(self) -> str:
        return "".join(f"{b}={v!r}\n" for b, v in zip(BLOCK_NAMES, self.values))

    @classmethod
    def loads(cls, text: str) -> "FeatureWeights":
        raw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"expected key=value, got {line!r}")
            raw[key.strip()] = float(val)
        return cls.from_raw(raw)

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "FeatureWeights":
        with open(path, encoding="ascii") as fh:
            return cls.loads(fh.read())


def _as_rows(x) -> np.ndarray:
    v = getattr(x, "values", x)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.ndim != 2 or v.shape[1] != len(FEATURE_NAMES):
        raise ShapeError(f"feature rows must have {len(FEATURE_NAMES)} columns, got shape {v.shape}")
    return v


def block_distance_matrices(a, b) -> np.ndarray:
    """Per-block (d_E + d_cos) between every row of ``a`` and every row of ``b``.

    Returns an array of shape (n_blocks, len(a), len(b)).
    """
    a, b = _as_rows(a), _as_rows(b)
    out = np.empty((len(BLOCK_NAMES), a.shape[0], b.shape[0]))
    for k, name in enumerate(BLOCK_NAMES):
        cols = _BLOCK_COLS[name]
        ua, vb = a[:, cols], b[:, cols]
        if FEATURE_BLOCKS[name][1]:
            out[k] = 2.0 * (ua[:, None, 0] != vb[None, :, 0])
            continue
        diff = ua[:, None, :] - vb[None, :, :]
        d_e = np.minimum(1.0, np.sqrt(np.sum(diff * diff, axis=2)) / math.sqrt(len(cols)))
        na = np.sqrt(np.sum(ua * ua, axis=1))
        nb = np.sqrt(np.sum(vb * vb, axis=1))
        denom = na[:, None] * nb[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.clip((ua @ vb.T) / denom, -1.0, 1.0)
        d_cos = np.where(denom > 0, (1.0 - cos) / 2.0, 0.0)
        out[k] = d_e + d_cos
    return out


def block_distances(u, v) -> np.ndarray:
    """Per-block (d_E + d_cos) for a single pair of rows."""
    u, v = _as_rows(u), _as_rows(v)
    if u.shape[0] != 1 or v.shape[0] != 1:
        raise ShapeError("block_distances compares exactly one row with one row")
    return block_distance_matrices(u, v)[:, 0, 0]


def feature_distance(u, v, w: FeatureWeights) -> float:
    return float(w.array @ block_distances(u, v))


@dataclass
class DistanceMatrix:
    values: np.ndarray  # (n_ref, n_test), nonnegative

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def to_csv(self) -> str:
        return "\n".join(",".join(repr(float(x)) for x in row) for row in self.values) + "\n"


def distance_matrix(ref, test, w: FeatureWeights) -> DistanceMatrix:
    blocks = block_distance_matrices(ref, test)
    if blocks.shape[1] == 0 or blocks.shape[2] == 0:
        raise ValueError("both feature sets must be non-empty")
    return DistanceMatrix(np.tensordot(w.array, blocks, axes=1))


# ---------------------------------------------------------------------------
# Weight learning


def weights_from_distances(a) -> np.ndarray:
    """Weights from an (F, J) matrix of mean per-block distances over J samples.

    Each sample (column) is centred across blocks; the magnitude of the
    first principal axis over blocks, tilted by each block's robustness
    ``max(1 - mean distance, 0.05)``, gives the unnormalized weights.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError("distance profile must be 2-D (features x samples)")
    f, j = a.shape
    if j < 2:
        raise InsufficientDataError("need at least two augmented samples")
    if f == 1:
        return np.array([1.0])
    x = a.T - a.T.mean(axis=1, keepdims=True)
    if not np.any(np.abs(x) > 1e-15):
        load = np.ones(f)
    else:
        _, _, vt = np.linalg.svd(x, full_matrices=False)
        load = np.abs(vt[0])
    tilt = np.maximum(1.0 - a.mean(axis=1), 0.05)
    raw = load * tilt
    return raw / raw.sum()


def learn_weights(ref_features, samples) -> FeatureWeights:
    """Learn block weights from augmented copies of one reference.

    ``ref_features`` is the reference FeatureTable; ``samples`` is a list of
    ``(FeatureTable, pairs)`` where ``pairs`` are known (ref, test) node
    correspondences. Each sample is normalized jointly with the reference.
    """
    from treekp.graph import normalize_features

    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientDataError("need at least two augmented samples")
    cols = []
    for table, pairs in samples:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs) == 0:
            raise InsufficientDataError("augmented sample has no ground-truth pairs")
        nr, nt = normalize_features(ref_features, table)
        r = nr.values[pairs[:, 0]]
        t = nt.values[pairs[:, 1]]
        per_pair = np.stack([block_distance_matrices(r[i], t[i])[:, 0, 0] for i in range(len(pairs))], axis=1)
        cols.append(per_pair.mean(axis=1))
    return FeatureWeights(tuple(weights_from_distances(np.stack(cols, axis=1)).tolist()))


# ---------------------------------------------------------------------------
# Assignment


@dataclass(frozen=True)
class Assignment:
    pairs: tuple  # ((ref_index, test_index), ...) sorted by ref index
    total_cost: float

    def __len__(self) -> int:
        return len(self.pairs)


def assign_munkres(cost) -> Assignment:
    """Minimum-cost one-to-one assignment of rows to columns.

    Rectangular matrices are padded to square with ``1 + max entry``; pairs
    that land in the padding are dropped, leaving ``min(rows, cols)`` pairs.
    """
    s = np.asarray(getattr(cost, "values", cost), dtype=np.float64)
    if s.ndim != 2:
        raise ShapeError("cost matrix must be 2-D")
    if not np.all(np.isfinite(s)):
        raise ValueError("cost matrix must be finite")
    n_r, n_c = s.shape
    if n_r == 0 or n_c == 0:
        return Assignment((), 0.0)
    n = max(n_r, n_c)
    if n_r != n_c:
        padded = np.full((n, n), 1.0 + float(s.max()))
        padded[:n_r, :n_c] = s
    else:
        padded = s
    col = kernels.munkres_kernel(np.ascontiguousarray(padded))
    pairs = tuple((i, int(col[i])) for i in range(n_r) if col[i] < n_c)
    total = float(sum(s[i, j] for i, j in pairs))
    return Assignment(pairs, total)
