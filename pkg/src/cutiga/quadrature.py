"""Gauss quadrature on segments, full grid elements and clipped cut cells.

All rules are plain (points, weights) value objects; boundary rules carry the
segment's outward unit normal and tangent at every point.  Weights are always
positive and sum to the measure of the integration region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

__all__ = [
    "QuadRule",
    "gauss_segment",
    "tensor_rule_full_element",
    "cut_cell_rule",
    "triangle_rule",
]

_EPS_GEO = 1e-12


@dataclass(frozen=True)
class QuadRule:
    """Quadrature points and weights; normals/tangents for boundary rules."""

    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)
    normals: np.ndarray | None = None  # (n, 2) unit outward normals
    tangents: np.ndarray | None = None  # (n, 2) unit tangents

    def __len__(self):
        return self.weights.shape[0]

    def integrate(self, f):
        """Integral of ``f(points) -> (n,)`` against the rule."""
        if len(self) == 0:
            return 0.0
        return float(self.weights @ f(self.points))


_EMPTY = QuadRule(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2)))


_G01_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss01(n):
    """n-point Gauss-Legendre rule mapped to [0, 1] (cached)."""
    if n not in _G01_CACHE:
        x, w = leggauss(n)
        _G01_CACHE[n] = ((x + 1.0) / 2.0, w / 2.0)
    return _G01_CACHE[n]


def gauss_segment(a, b, npts, normal=None, tangent=None):
    """Gauss-Legendre rule on the segment a->b, exact for degree 2*npts-1.

    The rule carries the constant unit tangent ``t = (b-a)/|b-a|`` and the
    outward normal ``n = (t_y, -t_x)`` of a counterclockwise boundary
    traversal; pass ``normal``/``tangent`` to reuse the parent edge's exact
    direction for very short pieces.  A zero-length segment yields the empty
    rule.
    """
    if npts < 1:
        raise ValueError("npts must be >= 1")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    if length == 0.0:
        return _EMPTY
    s, w = _gauss01(npts)
    pts = a[None, :] + s[:, None] * (b - a)[None, :]
    if tangent is None:
        tangent = (b - a) / length
    if normal is None:
        normal = np.array([tangent[1], -tangent[0]])
    return QuadRule(
        pts,
        w * length,
        np.broadcast_to(normal, pts.shape).copy(),
        np.broadcast_to(tangent, pts.shape).copy(),
    )


def tensor_rule_full_element(elem, npts_per_axis):
    """Tensor Gauss rule on the axis-aligned square ``elem = (x0, y0, h)``,
    exact for Q^{2*npts-1}."""
    if npts_per_axis < 1:
        raise ValueError("npts_per_axis must be >= 1")
    x0, y0, h = elem
    s, w = _gauss01(npts_per_axis)
    X, Y = np.meshgrid(x0 + h * s, y0 + h * s, indexing="ij")
    W = np.outer(w, w).ravel() * h * h
    return QuadRule(np.column_stack([X.ravel(), Y.ravel()]), W)


def _conical_triangle_rule(npts):
    """Positive-weight rule on the reference triangle (0,0),(1,0),(0,1),
    exact for total degree <= 2*npts-1 (conical product of Gauss-Jacobi in x
    and Gauss-Legendre in the collapsed coordinate)."""
    # integral_0^1 (1-x) integral_0^1 f(x, (1-x)u) du dx
    xj, wj = roots_jacobi(npts, 1.0, 0.0)  # weight (1-x) on [-1, 1]
    x = (xj + 1.0) / 2.0
    wx = wj / 4.0  # maps weight (1-x)dx on [0,1]
    u, wu = _gauss01(npts)
    X = np.repeat(x, npts)
    U = np.tile(u, npts)
    W = np.repeat(wx, npts) * np.tile(wu, npts)
    Y = (1.0 - X) * U
    return np.column_stack([X, Y]), W


_TRI_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def triangle_rule(v0, v1, v2, npts):
    """Rule on the triangle (v0, v1, v2), exact for total degree 2*npts-1."""
    if npts not in _TRI_CACHE:
        _TRI_CACHE[npts] = _conical_triangle_rule(npts)
    ref_pts, ref_w = _TRI_CACHE[npts]
    v0 = np.asarray(v0, dtype=float)
    e1 = np.asarray(v1, dtype=float) - v0
    e2 = np.asarray(v2, dtype=float) - v0
    det = e1[0] * e2[1] - e1[1] * e2[0]
    pts = v0[None, :] + ref_pts[:, :1] * e1[None, :] + ref_pts[:, 1:] * e2[None, :]
    return QuadRule(pts, ref_w * abs(det))


def cut_cell_rule(clipped, npts):
    """Rule over a clipped cut-cell polygon (star-shaped w.r.t. its centroid).

    Fan-triangulates from the centroid and applies the degree ``2*npts-1``
    triangle rule on every fan triangle.  Degenerate polygons give the empty
    rule.
    """
    poly = np.asarray(clipped, dtype=float)
    if poly.shape[0] < 3:
        return _EMPTY
    x, y = poly[:, 0], poly[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * cross.sum()
    if area <= _EPS_GEO * max(np.ptp(x), np.ptp(y), 1.0) ** 2:
        return _EMPTY
    centroid = poly.mean(axis=0)
    pts, wts = [], []
    m = poly.shape[0]
    for i in range(m):
        r = triangle_rule(centroid, poly[i], poly[(i + 1) % m], npts)
        if len(r):
            pts.append(r.points)
            wts.append(r.weights)
    if not pts:
        return _EMPTY
    return QuadRule(np.vstack(pts), np.concatenate(wts))
