from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import brute_force_assignment
from treekp import matching
from treekp.errors import InsufficientDataError, ShapeError
from treekp.graph import COL, FEATURE_NAMES, FeatureTable
from treekp.matching import BLOCK_NAMES, FEATURE_BLOCKS, FeatureWeights


def only(block):
    return FeatureWeights.from_raw({block: 1.0})


def random_rows(rng, n):
    v = rng.random((n, len(FEATURE_NAMES)))
    v[:, COL["Type"]] = rng.integers(0, 4, n)
    v[:, COL["ParentType"]] = rng.integers(-1, 4, n)
    return v


def oracle_distance(u, v, w):
    total = 0.0
    for wk, name in zip(w.values, BLOCK_NAMES):
        cols, categorical = FEATURE_BLOCKS[name]
        a = [u[COL[c]] for c in cols]
        b = [v[COL[c]] for c in cols]
        if categorical:
            term = 2.0 * (a[0] != b[0])
        else:
            e = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
            d_e = min(1.0, e / math.sqrt(len(cols)))
            na = math.sqrt(sum(x * x for x in a))
            nb = math.sqrt(sum(y * y for y in b))
            d_cos = 0.0 if na == 0 or nb == 0 else (1 - sum(x * y for x, y in zip(a, b)) / (na * nb)) / 2
            term = d_e + d_cos
        total += wk * term
    return total


# distances --------------------------------------------------------------------


def test_identity_distance_is_zero():
    u = random_rows(np.random.default_rng(0), 1)[0]
    assert matching.feature_distance(u, u, FeatureWeights.uniform()) == pytest.approx(0, abs=1e-15)


def test_antipodal_block():
    u = np.zeros(len(FEATURE_NAMES))
    v = np.zeros(len(FEATURE_NAMES))
    u[COL["X"]], v[COL["X"]] = 1.0, -1.0
    blocks = matching.block_distances(u, v)
    assert blocks[BLOCK_NAMES.index("position")] == 2.0
    assert matching.feature_distance(u, v, only("position")) == 2.0


def test_zero_vector_has_no_cosine_term():
    u = np.zeros(len(FEATURE_NAMES))
    v = np.zeros(len(FEATURE_NAMES))
    v[COL["Level"]] = 0.25
    assert matching.feature_distance(u, v, only("level")) == 0.25


def test_type_block_is_an_indicator():
    u = np.zeros(len(FEATURE_NAMES))
    v = u.copy()
    v[COL["Type"]] = 3
    assert matching.feature_distance(u, v, only("type")) == 2.0


def test_random_pairs_match_formula():
    rng = np.random.default_rng(1)
    w = FeatureWeights.from_raw(rng.random(len(BLOCK_NAMES)))
    for _ in range(50):
        u, v = random_rows(rng, 2)
        assert abs(matching.feature_distance(u, v, w) - oracle_distance(u, v, w)) < 1e-12
        assert matching.feature_distance(u, v, w) == pytest.approx(matching.feature_distance(v, u, w), abs=1e-15)


def test_distance_matrix_matches_entrywise():
    rng = np.random.default_rng(2)
    a, b = random_rows(rng, 4), random_rows(rng, 3)
    w = FeatureWeights.uniform()
    d = matching.distance_matrix(a, b, w)
    assert d.shape == (4, 3)
    for i in range(4):
        for j in range(3):
            assert abs(d.values[i, j] - oracle_distance(a[i], b[j], w)) < 1e-12
    self_d = matching.distance_matrix(a, a, w).values
    np.testing.assert_allclose(np.diag(self_d), 0, atol=1e-15)
    one = matching.distance_matrix(a[:1], b[:1], w).values
    assert one.shape == (1, 1) and one[0, 0] == pytest.approx(oracle_distance(a[0], b[0], w), abs=1e-12)
    assert len(d.to_csv().splitlines()) == 4


def test_shape_errors():
    with pytest.raises(ShapeError):
        matching.feature_distance(np.zeros(5), np.zeros(5), FeatureWeights.uniform())


# weights ------------------------------------------------------------------------


def test_weights_text_round_trip(tmp_path):
    w = FeatureWeights.from_raw(np.arange(1, len(BLOCK_NAMES) + 1))
    w.save(tmp_path / "w.txt")
    assert FeatureWeights.load(tmp_path / "w.txt") == w
    with pytest.raises(ValueError):
        FeatureWeights((0.5,) * len(BLOCK_NAMES))
    with pytest.raises(KeyError):
        FeatureWeights.from_raw({"colour": 1.0})


def test_identical_features_give_uniform_weights():
    a = np.tile(np.array([[0.2, 0.4, 0.1, 0.3]]), (5, 1))
    np.testing.assert_allclose(matching.weights_from_distances(a), np.full(5, 0.2), atol=1e-15)


def test_robust_feature_gets_more_than_its_share():
    rng = np.random.default_rng(3)
    a = rng.random((3, 4))
    a[0] = 0.0
    w = matching.weights_from_distances(a)
    # independent recomputation: centred samples, first right singular vector
    x = a.T - a.T.mean(axis=1, keepdims=True)
    evals, evecs = np.linalg.eigh(x.T @ x)
    ref = np.abs(evecs[:, -1]) * np.maximum(1 - a.mean(axis=1), 0.05)
    np.testing.assert_allclose(w, ref / ref.sum(), atol=1e-12)
    assert w[0] > 1 / 3


def test_single_feature_weight_is_one():
    assert matching.weights_from_distances(np.array([[0.3, 0.1]])).tolist() == [1.0]


def test_weights_need_two_samples():
    with pytest.raises(InsufficientDataError):
        matching.weights_from_distances(np.ones((3, 1)))
    t = FeatureTable(random_rows(np.random.default_rng(4), 3))
    with pytest.raises(InsufficientDataError):
        matching.learn_weights(t, [(t, [(0, 0)])])


def test_learn_weights_sums_to_one():
    rng = np.random.default_rng(5)
    ref = FeatureTable(random_rows(rng, 6))
    samples = []
    for _ in range(4):
        noisy = ref.values.copy()
        noisy[:, :12] += rng.normal(0, 0.05, (6, 12))
        samples.append((FeatureTable(noisy), [(i, i) for i in range(6)]))
    w = matching.learn_weights(ref, samples).array
    assert w.sum() == pytest.approx(1, abs=1e-12) and np.all(w >= 0)


# assignment ---------------------------------------------------------------------


def test_munkres_examples():
    a = matching.assign_munkres(np.array([[0, 9, 9], [9, 0, 9], [9, 9, 0]], float))
    assert a.pairs == ((0, 0), (1, 1), (2, 2)) and a.total_cost == 0
    a = matching.assign_munkres(np.array([[4, 1], [2, 8]], float))
    assert a.pairs == ((0, 1), (1, 0)) and a.total_cost == 3
    a = matching.assign_munkres(np.array([[1, 9, 9], [9, 1, 9]], float))
    assert a.pairs == ((0, 0), (1, 1)) and a.total_cost == 2
    assert matching.assign_munkres(np.zeros((0, 3))).pairs == ()


def test_munkres_tall_matrix():
    c = np.array([[5, 1], [1, 5], [0, 0]], float)
    a = matching.assign_munkres(c)
    assert len(a) == 2 and a.total_cost == brute_force_assignment(c)


@pytest.mark.parametrize("seed", range(40))
def test_munkres_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 7, 2)
    c = rng.integers(0, 20, (n, m)).astype(float) if seed % 2 else rng.random((n, m))
    a = matching.assign_munkres(c)
    assert a.total_cost == pytest.approx(brute_force_assignment(c), abs=1e-12)
    assert len(a) == min(n, m)
    assert len({i for i, _ in a.pairs}) == len({j for _, j in a.pairs}) == len(a)


def test_munkres_invariances():
    rng = np.random.default_rng(7)
    c = rng.random((6, 6))
    base = matching.assign_munkres(c)
    shifted = matching.assign_munkres(c + 3.5)
    assert shifted.pairs == base.pairs
    pr, pc = rng.permutation(6), rng.permutation(6)
    perm = matching.assign_munkres(c[pr][:, pc])
    assert perm.total_cost == pytest.approx(base.total_cost, abs=1e-12)
    mapped = sorted((int(pr[i]), int(pc[j])) for i, j in perm.pairs)
    assert mapped == sorted(base.pairs)


def test_munkres_rejects_non_finite():
    with pytest.raises(ValueError):
        matching.assign_munkres(np.array([[np.inf, 1.0], [1.0, 1.0]]))
