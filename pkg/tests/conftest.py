from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from treekp import augment, pipeline, skeleton  # noqa: E402


def y_skeleton():
    """Stem from (10, 18) up to (10, 10), then two diagonal arms to (3, 3) and (17, 3)."""
    s = np.zeros((20, 21), dtype=bool)
    s[10:19, 10] = True
    for k in range(1, 8):
        s[10 - k, 10 - k] = True
        s[10 - k, 10 + k] = True
    return s


def plus_skeleton():
    s = np.zeros((21, 21), dtype=bool)
    s[10, 2:19] = True
    s[2:19, 10] = True
    return s


def ring_skeleton():
    """8-minimal digital circle of radius ~11 about (20, 20) on a 41x41 grid."""
    yy, xx = np.mgrid[:41, :41]
    d = np.hypot(xx - 20, yy - 20)
    return skeleton.prune_spurs(skeleton.thin((d >= 10) & (d <= 12)), 5)


def ring_seed(ring):
    xs = np.nonzero(ring[20])[0]
    return int(xs.max()), 20


@pytest.fixture(scope="session")
def dendrite42():
    return augment.generate_dendrite(augment.SynthParams(rng_seed=42))


@pytest.fixture(scope="session")
def extraction42(dendrite42):
    return pipeline.extract(dendrite42)


@pytest.fixture(scope="session")
def small_dendrites():
    """Five quick 256-px patterns for store and CLI tests."""
    return {f"d{s}": augment.generate_dendrite(augment.SynthParams(rng_seed=s, particles=600, canvas=256))
            for s in range(5)}


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
