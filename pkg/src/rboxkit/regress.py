"""Regression targets between anchors and rotated ground-truth boxes.

The angle target is the minimal pi-periodic rotation taking the anchor onto
the target, so a corner labeling that is off by a half-turn never produces a
spurious full-turn gradient. Offsets are normalized by the anchor size, and
side lengths are compared in log space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    TWO_PI,
    box_center,
    box_dims,
    box_from_center,
    canonicalize,
    validate_boxes,
)


def angle_delta(theta_target, theta_pred):
    """Minimal pi-periodic angle delta from ``theta_pred`` to ``theta_target``.

    Candidates ``d - pi``, ``d + pi`` and ``d`` (with ``d`` the raw
    difference, both angles wrapped into [0, 2pi)) are ranked by magnitude and
    the smallest wins; an exact magnitude tie picks the positive candidate.
    For inputs already in [0, pi) the result lies in [-pi/2, pi/2], and
    ``theta_pred + delta`` always equals ``theta_target`` modulo pi.
    """
    tt = np.mod(np.asarray(theta_target, dtype=np.float64), TWO_PI)
    tp = np.mod(np.asarray(theta_pred, dtype=np.float64), TWO_PI)
    d = tt - tp
    cands = np.stack((d - math.pi, d + math.pi, d), axis=-1)
    mags = np.abs(cands)
    best = mags.min(axis=-1, keepdims=True)
    picked = np.where(mags == best, cands, -np.inf).max(axis=-1)
    if picked.ndim == 0:
        return float(picked)
    return picked


def encode(targets, anchors) -> np.ndarray:
    """Regression deltas (dx, dy, dlogw, dlogh, dtheta) from anchors to targets.

    Center offsets are normalized by the anchor's mean side length
    ``(W_a + H_a) / 2``; both angles are canonicalized to [0, pi) before the
    angle delta is taken. Accepts single boxes or equal-length batches.
    """
    t_rows = validate_boxes(targets)
    a_rows = validate_boxes(anchors)
    single = np.asarray(targets).ndim == 1 and np.asarray(anchors).ndim == 1
    if t_rows.shape[0] != a_rows.shape[0]:
        raise ValueError("targets and anchors must have the same length")
    t_can = canonicalize(t_rows)
    a_can = canonicalize(a_rows)
    t_ctr = box_center(t_can)
    a_ctr = box_center(a_can)
    t_dims = box_dims(t_can)
    a_dims = box_dims(a_can)
    norm = (a_dims[:, 0] + a_dims[:, 1]) / 2.0
    out = np.empty_like(t_rows)
    out[:, 0] = (t_ctr[:, 0] - a_ctr[:, 0]) / norm
    out[:, 1] = (t_ctr[:, 1] - a_ctr[:, 1]) / norm
    out[:, 2] = np.log(t_dims[:, 0] / a_dims[:, 0])
    out[:, 3] = np.log(t_dims[:, 1] / a_dims[:, 1])
    out[:, 4] = angle_delta(t_can[:, 4], a_can[:, 4])
    return out[0] if single else out


def decode(deltas, anchors) -> np.ndarray:
    """Apply regression deltas to anchors; right-inverse of :func:`encode`.

    The decoded box reproduces the encoded target up to the rectangle's
    half-turn symmetry (IoU 1). Output boxes are canonical (theta in [0, pi)).
    """
    d = np.asarray(deltas, dtype=np.float64)
    single = d.ndim == 1 and np.asarray(anchors).ndim == 1
    d = np.atleast_2d(d)
    if d.shape[1] != 5:
        raise ValueError(f"expected deltas of shape (N, 5), got {d.shape}")
    a_rows = validate_boxes(anchors)
    if d.shape[0] != a_rows.shape[0]:
        raise ValueError("deltas and anchors must have the same length")
    a_can = canonicalize(a_rows)
    a_ctr = box_center(a_can)
    a_dims = box_dims(a_can)
    norm = (a_dims[:, 0] + a_dims[:, 1]) / 2.0
    cx = a_ctr[:, 0] + d[:, 0] * norm
    cy = a_ctr[:, 1] + d[:, 1] * norm
    with np.errstate(over="ignore"):
        w = a_dims[:, 0] * np.exp(d[:, 2])
        h = a_dims[:, 1] * np.exp(d[:, 3])
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(h))):
        bad = int(np.flatnonzero(~(np.isfinite(w) & np.isfinite(h)))[0])
        raise ValueError(f"delta {bad} produces a non-finite side length")
    theta = np.mod(a_can[:, 4] + d[:, 4], TWO_PI)
    out = canonicalize(box_from_center(cx, cy, w, h, theta))
    return out[0] if single else out


def smooth_l1(x, delta: float = 1.0):
    """Huber cost: ``x**2 / (2*delta)`` for |x| <= delta, else ``|x| - delta/2``."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax <= delta, x * x / (2.0 * delta), ax - delta / 2.0)
    if out.ndim == 0:
        return float(out)
    return out


def smooth_l1_grad(x, delta: float = 1.0):
    """Derivative of :func:`smooth_l1`; continuous at |x| = delta."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) <= delta, x / delta, np.sign(x))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LossConfig:
    """Per-term weights and Huber transition for the regression cost."""

    gammas: tuple[float, float, float, float, float] = (1.0, 1.0, 1.0, 1.0, 1.0)
    delta: float = 1.0

    def __post_init__(self):
        if len(self.gammas) != 5 or any(g <= 0 for g in self.gammas):
            raise ValueError("gammas must be 5 positive weights")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")

    @classmethod
    def from_json(cls, text_or_path) -> "LossConfig":
        try:
            data = json.loads(text_or_path)
        except (json.JSONDecodeError, TypeError):
            with open(text_or_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        return cls(gammas=tuple(data.get("gammas", (1.0,) * 5)), delta=float(data.get("delta", 1.0)))

    def to_json(self) -> str:
        return json.dumps({"gammas": list(self.gammas), "delta": self.delta})


def rpn_regression_loss(
    pred_deltas,
    anchors,
    targets,
    positive,
    config: LossConfig = LossConfig(),
) -> tuple[float, np.ndarray]:
    """Five-term smooth-L1 regression cost and its gradient.

    For each match with indicator 1 the cost adds
    ``sum_i smooth_l1(gamma_i * (target_delta_i - pred_delta_i), delta)``
    where the target deltas come from :func:`encode`. Matches with indicator 0
    contribute exactly zero loss and zero gradient.

    Returns:
        (loss, gradient) with the gradient taken w.r.t. ``pred_deltas``,
        shaped like it.
    """
    d = np.atleast_2d(np.asarray(pred_deltas, dtype=np.float64))
    a_rows = validate_boxes(anchors)
    t_rows = validate_boxes(targets)
    p = np.asarray(positive, dtype=np.float64).reshape(-1)
    if not (d.shape[0] == a_rows.shape[0] == t_rows.shape[0] == p.shape[0]):
        raise ValueError("pred_deltas, anchors, targets and positive must have equal lengths")
    gam = np.asarray(config.gammas, dtype=np.float64)
    target_d = np.atleast_2d(encode(t_rows, a_rows))
    r = gam[None, :] * (target_d - d)
    mask = (p != 0.0)[:, None]
    terms = np.where(mask, smooth_l1(r, config.delta), 0.0)
    grad = np.where(mask, -gam[None, :] * smooth_l1_grad(r, config.delta), 0.0)
    loss = float(np.sum(terms))
    return loss, grad.reshape(np.asarray(pred_deltas, dtype=np.float64).shape)
