from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import rot
from treekp import alignment
from treekp.alignment import CorrespondingSets
from treekp.errors import DegenerateInputError, EmptyInputError, ShapeError


def sweep_best_angle(p, q, step=1e-4):
    """Brute-force rotation minimising sum |R p_i - q_i|^2 for centred (2, N) sets."""
    thetas = np.arange(-math.pi, math.pi, step)
    c, s = np.cos(thetas), np.sin(thetas)
    # |R p - q|^2 = |p|^2 + |q|^2 - 2 q.(R p)
    gain = (c * (p[0] @ q[0] + p[1] @ q[1]) + s * (p[0] @ q[1] - p[1] @ q[0]))
    k = int(np.argmax(gain))
    # refine around the best grid angle by golden-section search
    lo, hi = thetas[k] - step, thetas[k] + step
    f = lambda t: -(math.cos(t) * (p[0] @ q[0] + p[1] @ q[1]) + math.sin(t) * (p[0] @ q[1] - p[1] @ q[0]))
    g = (math.sqrt(5) - 1) / 2
    for _ in range(80):
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        if f(a) < f(b):
            hi = b
        else:
            lo = a
    return (lo + hi) / 2


def residual(R, p, q):
    return float(np.sum((R @ p - q) ** 2))


def test_cross_covariance_examples():
    s = CorrespondingSets(np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]]), (0, 0), (0, 0))
    np.testing.assert_array_equal(alignment.cross_covariance(s), [[1, 0], [0, 0]])
    rng = np.random.default_rng(0)
    p = rng.normal(size=(2, 5))
    m = alignment.cross_covariance(CorrespondingSets(p, p, (0, 0), (0, 0)))
    np.testing.assert_allclose(m, m.T, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(m) >= -1e-12)
    q = rng.normal(size=(2, 5))
    loop = sum(np.outer(p[:, i], q[:, i]) for i in range(5))
    np.testing.assert_allclose(alignment.cross_covariance(CorrespondingSets(p, q, (0, 0), (0, 0))), loop, atol=1e-12)
    with pytest.raises(ShapeError):
        alignment.cross_covariance(CorrespondingSets(p, q[:, :4], (0, 0), (0, 0)))


def test_kabsch_examples():
    np.testing.assert_allclose(alignment.kabsch_rotation(np.eye(2)), np.eye(2), atol=1e-15)
    p = np.array([[1.0, -2.0, 0.0, 3.0], [0.0, 1.0, -2.0, 1.0]])
    q = np.array([[0, -1], [1, 0]]) @ p
    r = alignment.kabsch_rotation(p @ q.T)
    np.testing.assert_allclose(r, [[0, -1], [1, 0]], atol=1e-12)
    with pytest.raises(DegenerateInputError):
        alignment.kabsch_rotation(np.zeros((2, 2)))


def test_mirrored_set_stays_proper():
    p = np.array([[3.0, -1.0, -2.0], [0.0, 2.0, -2.0]])  # scalene, so no rotation undoes the mirror
    p = p - p.mean(axis=1, keepdims=True)
    q = np.diag([1.0, -1.0]) @ rot(0.4) @ p
    r = alignment.kabsch_rotation(p @ q.T)
    assert np.linalg.det(r) == pytest.approx(1, abs=1e-12)
    assert residual(r, p, q) > 1e-3
    best = sweep_best_angle(p, q)
    assert residual(r, p, q) - residual(rot(best), p, q) <= 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_kabsch_minimises_against_angle_sweep(seed):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(2, 12))
    q = rot(rng.uniform(-3, 3)) @ p + rng.normal(0, 0.3, (2, 12))
    p, q = p - p.mean(1, keepdims=True), q - q.mean(1, keepdims=True)
    r = alignment.kabsch_rotation(p @ q.T)
    assert residual(r, p, q) - residual(rot(sweep_best_angle(p, q)), p, q) <= 1e-6


def test_project_examples():
    t = alignment.RigidTransform(np.eye(2), (3.0, 4.0), (3.0, 4.0))
    pts = np.array([[1.0, 2.0], [5.0, -1.0]])
    np.testing.assert_array_equal(alignment.project(pts, t), pts)
    t = alignment.RigidTransform(rot(1.1), (3.0, 4.0), (-2.0, 7.0))
    np.testing.assert_allclose(alignment.project([3.0, 4.0], t), [[-2.0, 7.0]], atol=1e-15)


def test_fit_recovers_synthetic_rigid_motion():
    rng = np.random.default_rng(11)
    for _ in range(20):
        ref = rng.uniform(0, 500, (rng.integers(3, 50), 2))
        theta = rng.uniform(-math.pi, math.pi)
        test = (ref - 250) @ rot(theta).T + rng.uniform(-40, 40, 2) + 250
        tf = alignment.fit_rigid(test, ref)
        np.testing.assert_allclose(alignment.project(test, tf), ref, atol=1e-9)
        np.testing.assert_allclose(tf.R, rot(-theta), atol=1e-9)
        assert math.isclose(tf.angle_deg, math.degrees(-theta), abs_tol=1e-7) or \
            math.isclose(abs(tf.angle_deg), 180, abs_tol=1e-7)


def test_rigid_transform_invariants():
    rng = np.random.default_rng(12)
    for _ in range(200):
        r = alignment.kabsch_rotation(rng.normal(size=(2, 2)))
        np.testing.assert_allclose(r.T @ r, np.eye(2), atol=1e-9)
        assert np.linalg.det(r) == pytest.approx(1, abs=1e-9)


def test_loss_examples():
    a = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert alignment.matching_loss(a, a) == 0
    assert alignment.matching_loss(a, a + [1.0, 0.0]) == 1
    assert alignment.matching_loss(a, np.array([[0.0, 0.0], [3.0, 6.0]])) == 1
    with pytest.raises(EmptyInputError):
        alignment.matching_loss(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ShapeError):
        alignment.matching_loss(a, a[:1])


def test_loss_is_rigid_invariant():
    rng = np.random.default_rng(13)
    a, b = rng.random((9, 2)) * 100, rng.random((9, 2)) * 100
    t = alignment.RigidTransform(rot(0.7), (0.0, 0.0), (12.0, -3.0))
    assert alignment.matching_loss(alignment.project(a, t), alignment.project(b, t)) == pytest.approx(
        alignment.matching_loss(a, b), abs=1e-9)


def test_score_examples():
    ref = np.zeros((4, 2))
    assert alignment.score(ref + 1, ref).accuracy_pct == 100
    assert alignment.score(ref + 10, ref).accuracy_pct == 0
    half = np.array([[0, 0], [0, 0], [9, 0], [9, 0]], float)
    s = alignment.score(half, ref, tau=5)
    assert s.accuracy_pct == 50 and s.n_pairs == 4 and s.eta == 4.5
    assert s.similarity(9.0) == 50.0 and s.similarity(2.0) == 0.0 and s.similarity(0.0) == 0.0
    with pytest.raises(ValueError):
        alignment.score(ref, ref, tau=0)
