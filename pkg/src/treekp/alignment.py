"""Rigid 2-D alignment of matched key points and match scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from treekp.errors import DegenerateInputError, EmptyInputError, ShapeError

DEFAULT_TAU = 5.0


def _pts(a, name="points") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShapeError(f"{name} must be an (N, 2) array")
    return arr


@dataclass(frozen=True)
class CorrespondingSets:
    """Centred, column-paired coordinates: column i of P matches column i of Q."""

    P: np.ndarray  # (2, N) test, centred
    Q: np.ndarray  # (2, N) reference, centred
    c_T: tuple
    c_R: tuple

    @classmethod
    def from_points(cls, test, ref) -> "CorrespondingSets":
        t, r = _pts(test, "test"), _pts(ref, "ref")
        if t.shape != r.shape:
            raise ShapeError(f"point counts differ: {len(t)} vs {len(r)}")
        if len(t) == 0:
            raise EmptyInputError("no corresponding points")
        ct, cr = t.mean(axis=0), r.mean(axis=0)
        return cls((t - ct).T, (r - cr).T, (float(ct[0]), float(ct[1])), (float(cr[0]), float(cr[1])))


def cross_covariance(sets) -> np.ndarray:
    """M = P Q^T for (2, N) matrices P and Q."""
    p = np.asarray(sets.P, dtype=np.float64)
    q = np.asarray(sets.Q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 2 or p.shape[0] != 2:
        raise ShapeError(f"P and Q must both be 2xN, got {p.shape} and {q.shape}")
    if p.shape[1] == 0:
        raise EmptyInputError("no corresponding points")
    return p @ q.T


def rotation_matrix(theta) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def kabsch_rotation(m) -> np.ndarray:
    """Proper rotation R maximizing trace(R M), i.e. minimizing sum |R p_i - q_i|^2.

    For 2x2 matrices the SVD solution with determinant correction reduces
    to a single angle: theta = atan2(M01 - M10, M00 + M11).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (2, 2):
        raise ShapeError("M must be 2x2")
    if not np.all(np.isfinite(m)):
        raise ValueError("M must be finite")
    if not np.any(m):
        raise DegenerateInputError("cross-covariance is zero; rotation undefined")
    return rotation_matrix(math.atan2(m[0, 1] - m[1, 0], m[0, 0] + m[1, 1]))


@dataclass(frozen=True)
class RigidTransform:
    R: np.ndarray
    c_T: tuple
    c_R: tuple

    @property
    def angle_deg(self) -> float:
        return math.degrees(math.atan2(self.R[1, 0], self.R[0, 0]))


def fit_rigid(test, ref) -> RigidTransform:
    """Rotation about the test centroid plus translation onto the reference centroid."""
    sets = CorrespondingSets.from_points(test, ref)
    return RigidTransform(kabsch_rotation(cross_covariance(sets)), sets.c_T, sets.c_R)


def project(points, t: RigidTransform) -> np.ndarray:
    """p' = c_R + R (p - c_T), row-wise."""
    p = _pts(points)
    return np.asarray(t.c_R) + (p - np.asarray(t.c_T)) @ np.asarray(t.R).T


def _dists(projected, ref) -> np.ndarray:
    a, b = _pts(projected, "projected"), _pts(ref, "ref")
    if a.shape != b.shape:
        raise ShapeError(f"point counts differ: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise EmptyInputError("no points to compare")
    return np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])


def matching_loss(projected, ref) -> float:
    """Mean Euclidean distance between paired points."""
    return float(_dists(projected, ref).mean())


@dataclass(frozen=True)
class MatchScore:
    eta: float
    accuracy_pct: float
    n_pairs: int

    def similarity(self, scale: float) -> float:
        """``max(0, 100 (1 - eta / scale))``; scale is the reference radius."""
        if not scale > 0:
            return 0.0
        return max(0.0, 100.0 * (1.0 - self.eta / scale))


def score(projected, ref, tau=DEFAULT_TAU) -> MatchScore:
    if not tau > 0:
        raise ValueError("tau must be positive")
    d = _dists(projected, ref)
    hits = int(np.count_nonzero(d <= tau))
    return MatchScore(float(d.mean()), 100.0 * hits / len(d), len(d))
