"""The compiled kernels must agree bit for bit with the Python ones."""

from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import plus_skeleton, ring_seed, ring_skeleton, y_skeleton
from test_skeleton import random_blob
from treekp import _backend

py = _backend.get_kernels("python")
try:
    cy = _backend.get_kernels("cython")
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_active_backend_reported():
    assert _backend.BACKEND in ("python", "cython")
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")


@needs_ext
@pytest.mark.parametrize("seed", range(15))
def test_thin_agrees(seed):
    blob = random_blob(seed).astype(np.uint8)
    np.testing.assert_array_equal(py.thin_kernel(blob), cy.thin_kernel(blob))


def _same_trace(skel, seeds, max_steps=10**6):
    seeds = np.asarray(seeds, dtype=np.int64).reshape(-1, 2)
    a = py.trace_kernel(skel.astype(np.uint8), seeds, max_steps)
    b = cy.trace_kernel(skel.astype(np.uint8), seeds, max_steps)
    np.testing.assert_array_equal(np.asarray(a[0]).reshape(-1, 5), np.asarray(b[0]).reshape(-1, 5))
    assert tuple(a[1]) == tuple(b[1]) and bool(a[2]) == bool(b[2])


@needs_ext
def test_trace_agrees_on_fixtures():
    _same_trace(y_skeleton(), [(10, 18)])
    _same_trace(plus_skeleton(), [(14, 10), (10, 6), (6, 10), (10, 14)])
    ring = ring_skeleton()
    _same_trace(ring, [ring_seed(ring)])
    _same_trace(ring, [ring_seed(ring)], max_steps=7)


@needs_ext
@pytest.mark.parametrize("seed", range(10))
def test_trace_agrees_on_blobs(seed):
    skel = py.thin_kernel(random_blob(seed).astype(np.uint8)).astype(bool)
    ys, xs = np.nonzero(skel)
    _same_trace(skel, [(xs[0], ys[0])])


@needs_ext
@pytest.mark.parametrize("seed", range(20))
def test_munkres_agrees(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    c = rng.integers(0, 5, (n, n)).astype(float) if seed % 2 else rng.random((n, n))
    np.testing.assert_array_equal(py.munkres_kernel(c), cy.munkres_kernel(c))


@needs_ext
def test_dla_agrees():
    for seed in range(3):
        a = py.dla_kernel(400, 128, 1.0, np.random.default_rng(seed))
        b = cy.dla_kernel(400, 128, 1.0, np.random.default_rng(seed))
        np.testing.assert_array_equal(a, b)


def test_python_backend_reproduces_golden():
    root = Path(__file__).resolve().parents[1]
    code = (
        "from treekp import augment, graph, pipeline, _backend\n"
        "assert _backend.BACKEND == 'python'\n"
        "img = augment.generate_dendrite(augment.SynthParams(rng_seed=42))\n"
        "print(graph.dumps_graph(pipeline.extract(img).graph), end='')\n"
    )
    env = dict(os.environ, TREEKP_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout == (root / "tests" / "data" / "dendrite42.tpg").read_text()
