"""Rotated RoI max pooling with argmax recording and exact backward scatter.

The region is divided into k x k rotated cells whose corner offsets along the
box axes are floored to whole feature pixels, mirroring the coarse
quantization of classic RoI pooling (the two coincide at angle 0). A feature
pixel at integer coordinates belongs to a cell when its dot products with the
cell axes fall in [0, extent); cells that capture no pixel are filled from
the pixel nearest to the cell center.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import box_corners, box_dims

FMAP_MAGIC = b"FMAP"


@dataclass
class FeatureMap:
    """Dense (H, W, C) scalar grid with a feature-to-image scale factor."""

    data: np.ndarray
    spatial_stride: float = 1.0

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValueError(f"feature map must be (H, W, C) with positive dims, got {self.data.shape}")
        if self.spatial_stride <= 0:
            raise ValueError("spatial_stride must be > 0")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class PoolResult:
    """Pooled values, their source coordinates and the fill mask.

    ``argmax[i, j, c]`` is the (row, col) feature pixel whose value was
    taken for output cell (i, j) on channel c; ``fill_mask[i, j]`` marks
    cells that were empty and filled from the nearest pixel.
    """

    output: np.ndarray     # (k, k, C) float64
    argmax: np.ndarray     # (k, k, C, 2) int64
    fill_mask: np.ndarray  # (k, k) bool


@njit(cache=True)
def _pool_forward(data, xa, ya, ct, st, wf, hf, k):
    H, W, C = data.shape
    out = np.empty((k, k, C), dtype=np.float64)
    arg = np.empty((k, k, C, 2), dtype=np.int64)
    fill = np.zeros((k, k), dtype=np.bool_)
    bounds_ab = np.empty(k + 1, dtype=np.int64)
    bounds_bc = np.empty(k + 1, dtype=np.int64)
    for i in range(k + 1):
        bounds_ab[i] = int(np.floor(wf * i / k))
        bounds_bc[i] = int(np.floor(hf * i / k))
    ux = ct
    uy = st
    vx = -st
    vy = ct
    best = np.empty(C, dtype=np.float64)
    best_r = np.empty(C, dtype=np.int64)
    best_c = np.empty(C, dtype=np.int64)
    for cj in range(k):
        b0 = bounds_bc[cj]
        ch = bounds_bc[cj + 1] - b0
        for ci in range(k):
            a0 = bounds_ab[ci]
            cw = bounds_ab[ci + 1] - a0
            ox = xa + a0 * ux + b0 * vx
            oy = ya + a0 * uy + b0 * vy
            # scan the integer pixels inside the cell's bounding box
            xmin = ox
            xmax = ox
            ymin = oy
            ymax = oy
            for du in (0.0, 1.0):
                for dv in (0.0, 1.0):
                    px = ox + du * cw * ux + dv * ch * vx
                    py = oy + du * cw * uy + dv * ch * vy
                    if px < xmin:
                        xmin = px
                    if px > xmax:
                        xmax = px
                    if py < ymin:
                        ymin = py
                    if py > ymax:
                        ymax = py
            x_lo = max(0, int(np.ceil(xmin - 1e-9)))
            x_hi = min(W - 1, int(np.floor(xmax + 1e-9)))
            y_lo = max(0, int(np.ceil(ymin - 1e-9)))
            y_hi = min(H - 1, int(np.floor(ymax + 1e-9)))
            found = False
            for c in range(C):
                best[c] = -np.inf
            for py in range(y_lo, y_hi + 1):
                for px in range(x_lo, x_hi + 1):
                    rx = px - ox
                    ry = py - oy
                    t = rx * ux + ry * uy
                    if t < 0.0 or t >= cw:
                        continue
                    s = rx * vx + ry * vy
                    if s < 0.0 or s >= ch:
                        continue
                    found = True
                    for c in range(C):
                        v = data[py, px, c]
                        if v > best[c]:
                            best[c] = v
                            best_r[c] = py
                            best_c[c] = px
            if found:
                for c in range(C):
                    out[cj, ci, c] = best[c]
                    arg[cj, ci, c, 0] = best_r[c]
                    arg[cj, ci, c, 1] = best_c[c]
            else:
                ccx = ox + (cw * 0.5) * ux + (ch * 0.5) * vx
                ccy = oy + (cw * 0.5) * uy + (ch * 0.5) * vy
                nx = int(np.floor(ccx + 0.5))
                ny = int(np.floor(ccy + 0.5))
                if nx < 0:
                    nx = 0
                elif nx > W - 1:
                    nx = W - 1
                if ny < 0:
                    ny = 0
                elif ny > H - 1:
                    ny = H - 1
                fill[cj, ci] = True
                for c in range(C):
                    out[cj, ci, c] = data[ny, nx, c]
                    arg[cj, ci, c, 0] = ny
                    arg[cj, ci, c, 1] = nx
    return out, arg, fill


def rotated_roi_pool(fmap: FeatureMap, roi, output_size: int) -> PoolResult:
    """Max-pool a rotated region of ``fmap`` onto a k x k grid.

    The roi is given in image coordinates and scaled into feature coordinates
    by ``1 / fmap.spatial_stride``. Every output value is an input pixel value
    (max pooling selects, never interpolates); ties go to the lowest
    row-major pixel so the backward pass is deterministic.

    Raises:
        ValueError: if the roi lies fully outside the feature map, or k < 1.
    """
    k = int(output_size)
    if k < 1:
        raise ValueError("output_size must be >= 1")
    roi = np.asarray(roi, dtype=np.float64).reshape(-1)
    if roi.shape[0] != 5:
        raise ValueError(f"roi must have 5 parameters, got {roi.shape[0]}")
    scale = 1.0 / fmap.spatial_stride
    roi_f = np.array([roi[0] * scale, roi[1] * scale, roi[2] * scale, roi[3] * scale, roi[4]])
    w, h = box_dims(roi_f)
    corners = box_corners(roi_f)
    if (
        corners[:, 0].max() < 0.0
        or corners[:, 0].min() > fmap.width - 1.0
        or corners[:, 1].max() < 0.0
        or corners[:, 1].min() > fmap.height - 1.0
    ):
        raise ValueError("roi lies fully outside the feature map")
    out, arg, fill = _pool_forward(
        fmap.data,
        float(roi_f[0]),
        float(roi_f[1]),
        float(np.cos(roi_f[4])),
        float(np.sin(roi_f[4])),
        float(w),
        float(h),
        k,
    )
    return PoolResult(output=out, argmax=arg, fill_mask=fill)


@njit(cache=True)
def _pool_backward(grad, arg, H, W):
    k0, k1, C = grad.shape
    out = np.zeros((H, W, C), dtype=np.float64)
    for i in range(k0):
        for j in range(k1):
            for c in range(C):
                out[arg[i, j, c, 0], arg[i, j, c, 1], c] += grad[i, j, c]
    return out


def rotated_roi_pool_backward(grad_output, result: PoolResult, fmap_shape) -> np.ndarray:
    """Scatter-add ``grad_output`` back through the recorded argmax positions.

    Exact adjoint of the forward selection: cell gradients accumulate at
    their argmax pixels, summing when several cells share one pixel.
    """
    grad = np.ascontiguousarray(grad_output, dtype=np.float64)
    H, W, C = (int(v) for v in fmap_shape)
    if grad.shape != result.output.shape:
        raise ValueError(f"grad_output shape {grad.shape} != pooled shape {result.output.shape}")
    if grad.shape[2] != C:
        raise ValueError("channel count mismatch with fmap_shape")
    if result.argmax[..., 0].max() >= H or result.argmax[..., 1].max() >= W:
        raise ValueError("argmax coordinates exceed fmap_shape")
    return _pool_backward(grad, result.argmax, H, W)


def save_feature_map(path, fmap: FeatureMap) -> None:
    """Write the binary feature-map format: magic + H, W, C (u32 LE) + f32 data."""
    with open(path, "wb") as fh:
        fh.write(FMAP_MAGIC)
        fh.write(struct.pack("<III", fmap.height, fmap.width, fmap.channels))
        fh.write(np.ascontiguousarray(fmap.data, dtype="<f4").tobytes())


def load_feature_map(path, spatial_stride: float = 1.0) -> FeatureMap:
    """Read the binary feature-map format written by :func:`save_feature_map`."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != FMAP_MAGIC:
            raise ValueError(f"{path}: not a feature-map file (bad magic)")
        h, w, c = struct.unpack("<III", header[4:])
        payload = fh.read()
    expected = h * w * c * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: truncated payload ({len(payload)} bytes, expected {expected})")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(h, w, c)
    return FeatureMap(data=data, spatial_stride=spatial_stride)
