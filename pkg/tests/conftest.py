import numpy as np
import pytest

from rboxkit import box_from_center


def random_boxes(rng, n, extent=100.0, min_side=2.0, max_side=30.0):
    """Valid random boxes: uniform centers, sides and angle in [0, 2pi)."""
    cx = rng.uniform(0.0, extent, n)
    cy = rng.uniform(0.0, extent, n)
    w = rng.uniform(min_side, max_side, n)
    h = rng.uniform(min_side, max_side, n)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return box_from_center(cx, cy, w, h, theta)


def overlapping_pairs(rng, n, extent=100.0, max_offset=20.0, min_side=5.0, max_side=40.0):
    """Box pairs whose centers are near each other, so overlap is common."""
    a = random_boxes(rng, n, extent=extent, min_side=min_side, max_side=max_side)
    off = rng.uniform(-max_offset, max_offset, (n, 2))
    cx = (a[:, 0] + a[:, 2]) / 2.0 + off[:, 0]
    cy = (a[:, 1] + a[:, 3]) / 2.0 + off[:, 1]
    w = rng.uniform(min_side, max_side, n)
    h = rng.uniform(min_side, max_side, n)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return a, box_from_center(cx, cy, w, h, theta)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
