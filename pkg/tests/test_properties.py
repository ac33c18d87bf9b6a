from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_force_assignment, components8, kmeans_1d_optimal_sse
from treekp import alignment, graph, matching, skeleton
from treekp.fusion import RESCALE_FLOOR, kmeans_1d, rescale01
from treekp.keypoints import KeyPoint

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def cost_matrices(draw):
    n = draw(st.integers(1, 6))
    m = draw(st.integers(1, 6))
    return draw(arrays(np.float64, (n, m), elements=st.floats(0, 100, allow_nan=False)))


@given(cost_matrices())
@settings(max_examples=150, deadline=None)
def test_munkres_is_optimal(c):
    a = matching.assign_munkres(c)
    assert len(a) == min(c.shape)
    assert a.total_cost == sum(c[i, j] for i, j in a.pairs)
    assert abs(a.total_cost - brute_force_assignment(c)) <= 1e-9 * max(1.0, abs(a.total_cost))


@given(arrays(np.float64, (2, 2), elements=finite))
@settings(max_examples=200, deadline=None)
def test_kabsch_output_is_a_rotation(m):
    if np.abs(m).sum() == 0:
        return
    r = alignment.kabsch_rotation(m)
    np.testing.assert_allclose(r.T @ r, np.eye(2), atol=1e-9)
    assert abs(np.linalg.det(r) - 1) <= 1e-9


@given(arrays(np.bool_, st.tuples(st.integers(3, 24), st.integers(3, 24))))
@settings(max_examples=100, deadline=None)
def test_thinning_properties(mask):
    if not mask.any():
        return
    t = skeleton.thin(mask)
    assert not (t & ~mask).any()
    np.testing.assert_array_equal(skeleton.thin(t), t)
    assert components8(t) == components8(mask)


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=25), st.integers(1, 3))
@settings(max_examples=150, deadline=None)
def test_kmeans_reaches_optimal_sse(values, k):
    v = np.array(values)
    cents, labels = kmeans_1d(v, k)
    assert np.all(np.diff(cents) > 0)
    sse = float(((v - cents[labels]) ** 2).sum())
    if np.unique(v).size > k:
        assert sse <= kmeans_1d_optimal_sse(v, k) + 1e-9


@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=finite))
def test_rescale_range(p):
    r = rescale01(p)
    assert r.min() >= 0 and r.max() <= 1
    if np.ptp(p) > RESCALE_FLOOR:
        assert r.min() == 0 and r.max() == 1
    else:
        assert not r.any()


@st.composite
def random_trees(draw):
    n = draw(st.integers(1, 30))
    coord = st.floats(0, 511, allow_nan=False)
    nodes = [KeyPoint(0, draw(coord), draw(coord), "root", None, 0)]
    for i in range(1, n):
        parent = draw(st.integers(0, i - 1))
        kind = "seed" if parent == 0 else draw(st.sampled_from(["bifurcation", "end"]))
        nodes.append(KeyPoint(i, draw(coord), draw(coord), kind, parent, nodes[parent].level + 1,
                              draw(st.booleans()) and kind == "end"))
    return graph.build_graph(nodes, (512, 512))


@given(random_trees())
@settings(max_examples=100, deadline=None)
def test_graph_text_round_trip(g):
    assert graph.loads_graph(graph.dumps_graph(g)) == g


@given(random_trees())
@settings(max_examples=100, deadline=None)
def test_feature_invariants(g):
    t = graph.compute_features(g)
    assert len(t) == len(g)
    ch = g.children
    counts = t.column("ChildCount")
    assert [int(c) for c in counts] == [len(ch[i]) for i in range(len(g))]
    for n in g.nodes[1:]:
        p = g.nodes[n.parent]
        assert math.isclose(t.values[n.index, graph.COL["RelativeLength"]], math.hypot(n.x - p.x, n.y - p.y),
                            abs_tol=1e-9)
    a, b = graph.normalize_features(t, t)
    k = len(graph.NUMERIC_FEATURES)
    assert np.all((a.values[:, :k] >= 0) & (a.values[:, :k] <= 1))
    np.testing.assert_array_equal(a.values, b.values)


@given(random_trees(), random_trees())
@settings(max_examples=50, deadline=None)
def test_distance_matrix_bounds(g1, g2):
    a, b = graph.normalize_features(graph.compute_features(g1), graph.compute_features(g2))
    d = matching.distance_matrix(a.values, b.values, matching.FeatureWeights.uniform()).values
    assert np.all(d >= -1e-12) and np.all(d <= 2 + 1e-12)
