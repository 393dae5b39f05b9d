"""Rotated-box geometry: parametrization, corners, exact polygon clipping and IoU.

Coordinate conventions used across the package:

- Image coordinates: x grows right, y grows down.
- A rotated box is the 5-tuple ``(x_a, y_a, x_c, y_c, theta)`` where A and C
  are two opposite corners of the rectangle and ``theta`` (radians) is the
  angle between the horizontal and the edge AB, counted clockwise on screen.
  The corners A, B, C, D appear in clockwise order on screen (which is
  anticlockwise in conventional y-up axes).
- With ``dx = x_c - x_a`` and ``dy = y_c - y_a`` the side lengths are::

      AB =  cos(theta) * dx + sin(theta) * dy
      BC = -sin(theta) * dx + cos(theta) * dy

  Both must be strictly positive for a valid box; ``theta = 0`` makes the
  tuple coincide with a VOC ``(x_min, y_min, x_max, y_max)`` box.
- A rectangle is invariant under swapping A and C while adding pi to theta,
  so any box can be brought to a canonical angle in ``[0, pi)``.

Batched inputs are ``(N, 5)`` float arrays; single boxes may be passed as any
length-5 sequence. All kernels compute in double precision.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit, prange

TWO_PI = 2.0 * math.pi

# Relative tolerance of the inclusive half-plane test used while clipping:
# points within EDGE_EPS * max(1, |coords|) of a clip edge count as inside,
# which keeps IoU stable for abutting boxes.
EDGE_EPS = 1e-9


class InvalidBoxError(ValueError):
    """A box whose side lengths are not strictly positive."""


class RotatedBox(NamedTuple):
    """Corner-pair parametrization of an oriented rectangle."""

    x_a: float
    y_a: float
    x_c: float
    y_c: float
    theta: float


def _as_rows(boxes) -> tuple[np.ndarray, bool]:
    """Coerce to a C-contiguous (N, 5) float64 array; flag single-box input."""
    arr = np.ascontiguousarray(boxes, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise ValueError(f"expected boxes of shape (N, 5) or (5,), got {arr.shape}")
    return arr, single


def _raw_dims(rows: np.ndarray) -> np.ndarray:
    dx = rows[:, 2] - rows[:, 0]
    dy = rows[:, 3] - rows[:, 1]
    c = np.cos(rows[:, 4])
    s = np.sin(rows[:, 4])
    return np.stack((c * dx + s * dy, -s * dx + c * dy), axis=1)


def _check_dims(rows: np.ndarray, dims: np.ndarray) -> None:
    if not np.all(np.isfinite(rows)):
        bad = int(np.flatnonzero(~np.isfinite(rows).all(axis=1))[0])
        raise InvalidBoxError(f"box {bad} has non-finite coordinates")
    ok = dims > 0.0
    if not ok.all():
        bad = int(np.flatnonzero(~ok.all(axis=1))[0])
        name = "AB" if not ok[bad, 0] else "BC"
        value = dims[bad, 0] if name == "AB" else dims[bad, 1]
        raise InvalidBoxError(f"box {bad}: side {name} = {value:.6g} must be > 0")


def validate_boxes(boxes) -> np.ndarray:
    """Return (N, 5) float64 rows, raising :class:`InvalidBoxError` on bad boxes."""
    rows, _ = _as_rows(boxes)
    _check_dims(rows, _raw_dims(rows))
    return rows


def box_dims(boxes) -> np.ndarray:
    """Side lengths (AB, BC) of one box or a batch.

    Args:
        boxes: ``(5,)`` or ``(N, 5)`` array-like.

    Returns:
        ``(2,)`` or ``(N, 2)`` array of (AB, BC) = (width, height).

    Raises:
        InvalidBoxError: if any box has a non-positive side.
    """
    rows, single = _as_rows(boxes)
    dims = _raw_dims(rows)
    _check_dims(rows, dims)
    return dims[0] if single else dims


def box_center(boxes) -> np.ndarray:
    """Rectangle center, the midpoint of the A-C diagonal."""
    rows, single = _as_rows(boxes)
    ctr = np.stack(((rows[:, 0] + rows[:, 2]) / 2.0, (rows[:, 1] + rows[:, 3]) / 2.0), axis=1)
    return ctr[0] if single else ctr


def box_corners(boxes) -> np.ndarray:
    """Corners A, B, C, D of one box or a batch.

    Returns ``(4, 2)`` for a single box, ``(N, 4, 2)`` for a batch, with
    B = A + AB*(cos t, sin t) and D = A + BC*(-sin t, cos t).
    """
    rows, single = _as_rows(boxes)
    dims = _raw_dims(rows)
    _check_dims(rows, dims)
    out = _corner_array(rows, dims)
    return out[0] if single else out


def _corner_array(rows: np.ndarray, dims: np.ndarray) -> np.ndarray:
    c = np.cos(rows[:, 4])
    s = np.sin(rows[:, 4])
    w = dims[:, 0]
    h = dims[:, 1]
    out = np.empty((rows.shape[0], 4, 2), dtype=np.float64)
    out[:, 0, 0] = rows[:, 0]
    out[:, 0, 1] = rows[:, 1]
    out[:, 1, 0] = rows[:, 0] + w * c
    out[:, 1, 1] = rows[:, 1] + w * s
    out[:, 2, 0] = rows[:, 2]
    out[:, 2, 1] = rows[:, 3]
    out[:, 3, 0] = rows[:, 0] - h * s
    out[:, 3, 1] = rows[:, 1] + h * c
    return out


def box_from_center(cx, cy, width, height, theta) -> np.ndarray:
    """Build boxes from center, side lengths and angle (broadcasting inputs)."""
    cx, cy, width, height, theta = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (cx, cy, width, height, theta))
    )
    c = np.cos(theta)
    s = np.sin(theta)
    # half-diagonal = (W*u + H*v) / 2 with u = (c, s), v = (-s, c)
    hx = (width * c - height * s) / 2.0
    hy = (width * s + height * c) / 2.0
    out = np.stack((cx - hx, cy - hy, cx + hx, cy + hy, theta), axis=-1)
    return out


def canonicalize(boxes) -> np.ndarray:
    """Map theta into [0, pi), swapping A and C where a half-turn is removed.

    The rectangle is unchanged; only the corner labeling moves. Input rank is
    preserved.
    """
    rows, single = _as_rows(boxes)
    out = rows.copy()
    out[:, 4] = np.mod(out[:, 4], TWO_PI)
    flip = out[:, 4] >= math.pi
    if flip.any():
        out[flip, 0], out[flip, 2] = rows[flip, 2], rows[flip, 0]
        out[flip, 1], out[flip, 3] = rows[flip, 3], rows[flip, 1]
        out[flip, 4] -= math.pi
    return out[0] if single else out


def polygon_area(poly) -> float:
    """Non-negative area of a polygon via the shoelace sum; < 3 vertices -> 0."""
    pts = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 3:
        return 0.0
    x = pts[:, 0]
    y = pts[:, 1]
    s = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return abs(float(s)) / 2.0


def _signed_area(pts: np.ndarray) -> float:
    if pts.shape[0] < 3:
        return 0.0
    x = pts[:, 0]
    y = pts[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) / 2.0


@njit(cache=True)
def _clip_convex(sub, ns, clip, nc, eps, buf_a, buf_b):
    # Sutherland-Hodgman against each clip edge; both polygons anticlockwise
    # in y-up axes (positive shoelace). Points within eps of an edge are kept.
    # Result is left in buf_a; returns the vertex count.
    n = ns
    for i in range(n):
        buf_a[i, 0] = sub[i, 0]
        buf_a[i, 1] = sub[i, 1]
    for e in range(nc):
        if n == 0:
            return 0
        ax = clip[e, 0]
        ay = clip[e, 1]
        f = e + 1
        if f == nc:
            f = 0
        ex = clip[f, 0] - ax
        ey = clip[f, 1] - ay
        lim = -eps * math.sqrt(ex * ex + ey * ey)
        m = 0
        px = buf_a[n - 1, 0]
        py = buf_a[n - 1, 1]
        dp = ex * (py - ay) - ey * (px - ax)
        for i in range(n):
            qx = buf_a[i, 0]
            qy = buf_a[i, 1]
            dq = ex * (qy - ay) - ey * (qx - ax)
            if (dq >= lim) != (dp >= lim):
                t = dp / (dp - dq)
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                buf_b[m, 0] = px + t * (qx - px)
                buf_b[m, 1] = py + t * (qy - py)
                m += 1
            if dq >= lim:
                buf_b[m, 0] = qx
                buf_b[m, 1] = qy
                m += 1
            px = qx
            py = qy
            dp = dq
        for i in range(m):
            buf_a[i, 0] = buf_b[i, 0]
            buf_a[i, 1] = buf_b[i, 1]
        n = m
    return n


@njit(cache=True)
def _buf_area(buf, n):
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        s += buf[i, 0] * buf[j, 1] - buf[j, 0] * buf[i, 1]
    return 0.5 * abs(s)


@njit(cache=True)
def _quad_areas(corners):
    # same shoelace evaluation as the clipped polygons, so that a box clipped
    # by itself reproduces its own area bit for bit
    n = corners.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _buf_area(corners[i], 4)
    return out


@njit(cache=True)
def _pair_iou(ca, cb, area_a, area_b):
    # AABB prefilter plus exact rect-rect clipping; ca/cb are (4, 2) corners.
    axmin = ca[0, 0]
    axmax = ca[0, 0]
    aymin = ca[0, 1]
    aymax = ca[0, 1]
    bxmin = cb[0, 0]
    bxmax = cb[0, 0]
    bymin = cb[0, 1]
    bymax = cb[0, 1]
    scale = 1.0
    for i in range(4):
        x = ca[i, 0]
        y = ca[i, 1]
        if x < axmin:
            axmin = x
        if x > axmax:
            axmax = x
        if y < aymin:
            aymin = y
        if y > aymax:
            aymax = y
        ax = abs(x)
        ay2 = abs(y)
        if ax > scale:
            scale = ax
        if ay2 > scale:
            scale = ay2
        x = cb[i, 0]
        y = cb[i, 1]
        if x < bxmin:
            bxmin = x
        if x > bxmax:
            bxmax = x
        if y < bymin:
            bymin = y
        if y > bymax:
            bymax = y
        ax = abs(x)
        ay2 = abs(y)
        if ax > scale:
            scale = ax
        if ay2 > scale:
            scale = ay2
    eps = EDGE_EPS * scale
    if axmin > bxmax + eps or bxmin > axmax + eps:
        return 0.0
    if aymin > bymax + eps or bymin > aymax + eps:
        return 0.0
    buf_a = np.empty((10, 2), dtype=np.float64)
    buf_b = np.empty((10, 2), dtype=np.float64)
    n = _clip_convex(ca, 4, cb, 4, eps, buf_a, buf_b)
    inter = _buf_area(buf_a, n)
    smaller = min(area_a, area_b)
    if inter > smaller:
        inter = smaller
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    if iou > 1.0:
        return 1.0
    if iou < 0.0:
        return 0.0
    return iou


@njit(cache=True, parallel=True)
def _iou_matrix_kernel(ca, areas_a, cb, areas_b):
    n = ca.shape[0]
    m = cb.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    for i in prange(n):
        for j in range(m):
            out[i, j] = _pair_iou(ca[i], cb[j], areas_a[i], areas_b[j])
    return out


def _corners_and_areas(boxes) -> tuple[np.ndarray, np.ndarray]:
    rows, _ = _as_rows(boxes)
    dims = _raw_dims(rows)
    _check_dims(rows, dims)
    corners = _corner_array(rows, dims)
    return corners, _quad_areas(corners)


def clip_polygon(subject, clip) -> np.ndarray:
    """Intersection of two convex polygons (Sutherland-Hodgman).

    Winding of either input may be clockwise or anticlockwise; it is detected
    internally and the result comes back in the subject's winding. Returns an
    ``(M, 2)`` array, empty when the polygons are disjoint.
    """
    sub = np.asarray(subject, dtype=np.float64).reshape(-1, 2)
    clp = np.asarray(clip, dtype=np.float64).reshape(-1, 2)
    if sub.shape[0] == 0 or clp.shape[0] == 0:
        return np.empty((0, 2), dtype=np.float64)
    sub_ccw = _signed_area(sub) >= 0.0
    clp_ccw = _signed_area(clp) >= 0.0
    sub_p = np.ascontiguousarray(sub if sub_ccw else sub[::-1])
    clp_p = np.ascontiguousarray(clp if clp_ccw else clp[::-1])
    coords = max(1.0, float(np.max(np.abs(sub_p))), float(np.max(np.abs(clp_p))))
    eps = EDGE_EPS * coords
    cap = sub_p.shape[0] + clp_p.shape[0] + 2
    buf_a = np.empty((cap, 2), dtype=np.float64)
    buf_b = np.empty((cap, 2), dtype=np.float64)
    n = _clip_convex(sub_p, sub_p.shape[0], clp_p, clp_p.shape[0], eps, buf_a, buf_b)
    out = buf_a[:n].copy()
    if not sub_ccw:
        out = out[::-1].copy()
    return out


def rotated_iou(a, b) -> float:
    """Exact intersection-over-union of two rotated boxes.

    The intersection is obtained by clipping one rectangle with the edges of
    the other and taking the shoelace area of the result; no sampling is
    involved. Result is symmetric in the arguments and lies in [0, 1]; a
    degenerate union yields 0.
    """
    ca, aa = _corners_and_areas(a)
    cb, ab = _corners_and_areas(b)
    if ca.shape[0] != 1 or cb.shape[0] != 1:
        raise ValueError("rotated_iou takes single boxes; use iou_matrix for batches")
    return float(_pair_iou(ca[0], cb[0], aa[0], ab[0]))


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise rotated IoU between two box batches.

    Args:
        a: ``(N, 5)`` array-like of boxes.
        b: ``(M, 5)`` array-like of boxes.

    Returns:
        ``(N, M)`` float64 matrix with entry (i, j) equal to
        ``rotated_iou(a[i], b[j])``. Rows are computed in parallel; the output
        is bitwise identical for any thread count.
    """
    ca, aa = _corners_and_areas(a)
    cb, ab = _corners_and_areas(b)
    if ca.shape[0] == 0 or cb.shape[0] == 0:
        return np.zeros((ca.shape[0], cb.shape[0]), dtype=np.float64)
    return _iou_matrix_kernel(ca, aa, cb, ab)
