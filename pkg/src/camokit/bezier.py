"""Cubic Bezier curves: evaluation and closed-form least-squares fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

Point = tuple[float, float]


@dataclass(frozen=True)
class CubicBezier:
    """Cubic Bezier in pixel coordinates (x right, y down).

    p0/p3 are the curve endpoints; p1/p2 are the interior control points
    that determine its shape.
    """

    p0: Point
    p1: Point
    p2: Point
    p3: Point

    def __post_init__(self):
        for name in ("p0", "p1", "p2", "p3"):
            p = getattr(self, name)
            if len(p) != 2 or not all(math.isfinite(c) for c in p):
                raise ParameterError(f"{name} must be a finite 2-D point, got {p!r}")
            object.__setattr__(self, name, (float(p[0]), float(p[1])))

    def control_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.p2, self.p3], dtype=np.float64)

    def control_polygon_length(self) -> float:
        c = self.control_array()
        return float(np.linalg.norm(np.diff(c, axis=0), axis=1).sum())


def eval_bezier(curve: CubicBezier, t):
    """Evaluate (1-t)^3 p0 + 3t(1-t)^2 p1 + 3t^2(1-t) p2 + t^3 p3.

    ``t`` may be a scalar or an array; every value must lie in [0, 1].
    Returns points of shape (..., 2).
    """
    t = np.asarray(t, dtype=np.float64)
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise ParameterError("curve parameter t must lie in [0, 1]")
    c = curve.control_array()
    u = 1.0 - t
    b = np.stack([u ** 3, 3.0 * t * u ** 2, 3.0 * t ** 2 * u, t ** 3], axis=-1)
    return b @ c


def chord_parameters(points: np.ndarray) -> np.ndarray:
    """Normalized cumulative chord length of a polyline, in [0, 1]."""
    points = np.asarray(points, dtype=np.float64)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    total = seg.sum()
    if total == 0.0:
        return np.linspace(0.0, 1.0, len(points))
    t = np.concatenate([[0.0], np.cumsum(seg)]) / total
    t[-1] = 1.0
    return t


@dataclass(frozen=True)
class BezierFit:
    curve: CubicBezier
    residual_rms: float
    fallback: bool  # True when the normal system was degenerate


def _straight_fallback(p0: np.ndarray, p3: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return p0 + (p3 - p0) / 3.0, p0 + 2.0 * (p3 - p0) / 3.0


def fit_cubic_bezier(points, params=None) -> BezierFit:
    """Least-squares cubic through ordered samples with pinned endpoints.

    p0 and p3 are fixed to the first and last sample; p1 and p2 minimize
    sum_i ||v_i - f(t_i)||^2 via the 2x2 normal equations per coordinate.
    ``params`` defaults to normalized chord length.  A degenerate normal
    matrix falls back to the straight segment at thirds.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ParameterError("need at least two 2-D samples to fit")
    t = chord_parameters(pts) if params is None else np.asarray(params, dtype=np.float64)
    if len(t) != len(pts):
        raise ParameterError("parameter count must match sample count")
    p0, p3 = pts[0], pts[-1]
    u = 1.0 - t
    b1 = 3.0 * t * u ** 2
    b2 = 3.0 * t ** 2 * u
    a11 = float(b1 @ b1)
    a12 = float(b1 @ b2)
    a22 = float(b2 @ b2)
    det = a11 * a22 - a12 * a12
    fallback = det <= 1e-12 * max(1.0, a11 * a22)
    if fallback:
        p1, p2 = _straight_fallback(p0, p3)
    else:
        rhs = pts - np.outer(u ** 3, p0) - np.outer(t ** 3, p3)
        r1 = b1 @ rhs  # (2,)
        r2 = b2 @ rhs
        p1 = (a22 * r1 - a12 * r2) / det
        p2 = (a11 * r2 - a12 * r1) / det
    curve = CubicBezier(tuple(p0), tuple(p1), tuple(p2), tuple(p3))
    resid = eval_bezier(curve, t) - pts
    rms = float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))
    return BezierFit(curve=curve, residual_rms=rms, fallback=fallback)
