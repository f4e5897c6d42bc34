"""Immersed polygonal domains on uniform background grids.

The computational domain is a simple counterclockwise polygon (an exact
4-vertex square, or a high-resolution inscribed polygon for the circle).
Elements of the background grid are classified Interior / Cut / Outside by
clipping; cut elements cache their clipped polygon, and every element caches
the pieces of the domain boundary it carries (with outward normals).  The
stabilization band is the set of boundary-carrying elements plus their
8-neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "INTERIOR",
    "CUT",
    "OUTSIDE",
    "BackgroundGrid",
    "ImmersedDomain",
    "BoundarySegment",
    "make_unit_square_domain",
    "make_unit_circle_domain",
    "classify_elements",
    "extract_stab_subdomain",
    "clip_element",
    "boundary_segments_in_element",
    "polygon_area",
    "points_in_polygon",
]

INTERIOR, CUT, OUTSIDE = 0, 1, 2

EPS_GEO = 1e-12  # relative to h^2; degenerate-cut reclassification threshold


@dataclass(frozen=True)
class BackgroundGrid:
    """Uniform grid of axis-aligned square elements."""

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("element size must be positive")

    def element_box(self, ex, ey):
        """(x0, y0, h) of element (ex, ey)."""
        return (self.origin[0] + ex * self.h, self.origin[1] + ey * self.h, self.h)

    def element_vertices(self, ex, ey):
        x0, y0, h = self.element_box(ex, ey)
        return np.array([[x0, y0], [x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h]])

    def cell_of(self, pt):
        """Element indices containing pt, clamped into the grid."""
        ex = min(max(int(math.floor((pt[0] - self.origin[0]) / self.h)), 0), self.nx - 1)
        ey = min(max(int(math.floor((pt[1] - self.origin[1]) / self.h)), 0), self.ny - 1)
        return ex, ey


@dataclass(frozen=True)
class BoundarySegment:
    """A straight piece of the domain boundary inside one element."""

    a: np.ndarray
    b: np.ndarray
    normal: np.ndarray  # unit, points out of the domain
    tangent: np.ndarray  # unit, CCW traversal direction

    @property
    def length(self):
        return float(np.hypot(*(self.b - self.a)))


def polygon_area(poly):
    """Signed area (positive for counterclockwise orientation)."""
    poly = np.asarray(poly, dtype=float)
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _clip_halfplane(poly, a, b):
    """Sutherland-Hodgman step: keep the part of poly left of directed a->b."""
    if len(poly) == 0:
        return []
    ax, ay = a
    bx, by = b
    ex, ey = bx - ax, by - ay
    out = []
    n = len(poly)
    sx, sy = poly[-1]
    s_in = ex * (sy - ay) - ey * (sx - ax) >= 0.0
    for i in range(n):
        px, py = poly[i]
        p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
        if p_in != s_in:
            # intersection of segment s->p with the line a->b
            dx, dy = px - sx, py - sy
            denom = ex * dy - ey * dx
            t = (ex * (ay - sy) - ey * (ax - sx)) / denom
            out.append((sx + t * dx, sy + t * dy))
        if p_in:
            out.append((px, py))
        sx, sy, s_in = px, py, p_in
    return out


def _dedupe(poly, tol):
    out = []
    for p in poly:
        if not out or abs(p[0] - out[-1][0]) > tol or abs(p[1] - out[-1][1]) > tol:
            out.append(p)
    if len(out) > 1 and abs(out[0][0] - out[-1][0]) <= tol and abs(out[0][1] - out[-1][1]) <= tol:
        out.pop()
    return out


def _clip_box_against_edges(box, edges):
    """Clip an element box against a list of boundary edges (half-planes).

    Valid whenever the listed edges include every boundary edge that meets
    the box (the polygon edge length is required to be much smaller than h,
    so the local chain is convex and the result is a convex polygon).
    """
    x0, y0, h = box
    poly = [(x0, y0), (x0 + h, y0), (x0 + h, y0 + h), (x0, y0 + h)]
    for a, b in edges:
        poly = _clip_halfplane(poly, a, b)
        if not poly:
            break
    return _dedupe(poly, 1e-14 * h)


def clip_element(elem, boundary):
    """Intersection polygon of an element box with the domain polygon.

    ``elem`` is (x0, y0, h); ``boundary`` a CCW polygon.  Returns a CCW vertex
    array, empty for disjoint inputs.  Exact (up to floating point) for convex
    boundaries, and for the locally-convex chains produced by the domain
    constructors.
    """
    boundary = np.asarray(boundary, dtype=float)
    edges = [(boundary[i], boundary[(i + 1) % len(boundary)]) for i in range(len(boundary))]
    poly = _clip_box_against_edges(elem, edges)
    return np.asarray(poly, dtype=float).reshape(-1, 2)


def points_in_polygon(pts, poly):
    """Crossing-number point-in-polygon test, vectorized over points."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    poly = np.asarray(poly, dtype=float)
    ax, ay = poly[:, 0], poly[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (bx - ax) / (by - ay)  # inf/nan only for horizontal edges,
    # where the straddle test is false anyway
    inside = np.zeros(pts.shape[0], dtype=bool)
    chunk = 1024
    for lo in range(0, pts.shape[0], chunk):
        px = pts[lo : lo + chunk, 0][:, None]
        py = pts[lo : lo + chunk, 1][:, None]
        straddle = (ay[None, :] > py) != (by[None, :] > py)
        with np.errstate(invalid="ignore"):
            hits = straddle & (px < ax[None, :] + (py - ay[None, :]) * slope[None, :])
        inside[lo : lo + chunk] = (hits.sum(axis=1) % 2) == 1
    return inside


def _convex_radii(poly):
    """(centroid, inradius, circumradius) for a convex CCW polygon, or None
    when the polygon is not convex.  Points closer to the centroid than the
    inradius are inside; farther than the circumradius, outside."""
    v = np.asarray(poly, dtype=float)
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    scale = np.abs(e).max() ** 2
    if np.any(cross < -1e-12 * scale):
        return None
    c = v.mean(axis=0)
    lens = np.hypot(e[:, 0], e[:, 1])
    dist = (e[:, 0] * (c[1] - v[:, 1]) - e[:, 1] * (c[0] - v[:, 0])) / np.where(lens > 0, lens, 1.0)
    r_in = float(dist[lens > 0].min())
    r_out = float(np.hypot(v[:, 0] - c[0], v[:, 1] - c[1]).max())
    if r_in <= 0:
        return None
    return c, r_in, r_out


def _split_edge_by_gridlines(a, b, grid):
    """Parameters in (0,1) where segment a->b crosses gridlines."""
    ts = []
    for axis in range(2):
        d = b[axis] - a[axis]
        if d == 0.0:
            continue
        lo, hi = sorted((a[axis], b[axis]))
        o = grid.origin[axis]
        k0 = math.ceil((lo - o) / grid.h)
        k1 = math.floor((hi - o) / grid.h)
        for k in range(k0, k1 + 1):
            t = (o + k * grid.h - a[axis]) / d
            if 0.0 < t < 1.0:
                ts.append(t)
    ts.sort()
    return ts


class ImmersedDomain:
    """Polygonal domain classified against a background grid.

    Immutable after construction; all per-element queries are pure.
    """

    def __init__(self, grid, boundary):
        boundary = np.asarray(boundary, dtype=float)
        if polygon_area(boundary) <= 0:
            raise ValueError("boundary polygon must be counterclockwise and non-degenerate")
        self.grid = grid
        self.boundary = boundary
        self._classify()
        self._extract_segments()
        self._build_stab_mask()

    # -- construction ------------------------------------------------------

    def _edge_list(self):
        m = self.boundary.shape[0]
        return [(self.boundary[i], self.boundary[(i + 1) % m]) for i in range(m)]

    def _bucket_edges(self):
        """Map each element to the boundary edges whose bbox touches it."""
        g = self.grid
        buckets = {}
        for a, b in self._edge_list():
            xlo, xhi = sorted((a[0], b[0]))
            ylo, yhi = sorted((a[1], b[1]))
            ex0 = max(int(math.floor((xlo - g.origin[0]) / g.h)), 0)
            ex1 = min(int(math.floor((xhi - g.origin[0]) / g.h)), g.nx - 1)
            ey0 = max(int(math.floor((ylo - g.origin[1]) / g.h)), 0)
            ey1 = min(int(math.floor((yhi - g.origin[1]) / g.h)), g.ny - 1)
            for ex in range(ex0, ex1 + 1):
                for ey in range(ey0, ey1 + 1):
                    buckets.setdefault((ex, ey), []).append((a, b))
        return buckets

    def _classify(self):
        g = self.grid
        buckets = self._bucket_edges()
        classes = np.full((g.nx, g.ny), OUTSIDE, dtype=np.int8)
        cut_polys = {}
        h2 = g.h * g.h
        full = (1.0 - EPS_GEO) * h2
        tiny = EPS_GEO * h2

        candidates = list(buckets.keys())
        for elem in candidates:
            poly = _clip_box_against_edges(g.element_box(*elem), buckets[elem])
            area = polygon_area(poly)
            if area <= tiny:
                classes[elem] = OUTSIDE
            elif area >= full:
                classes[elem] = INTERIOR
            else:
                classes[elem] = CUT
                cut_polys[elem] = np.asarray(poly, dtype=float)

        # edge-free elements are uniformly inside or outside: test centers
        free = [
            (ex, ey)
            for ex in range(g.nx)
            for ey in range(g.ny)
            if (ex, ey) not in buckets
        ]
        if free:
            centers = np.array(
                [
                    (g.origin[0] + (ex + 0.5) * g.h, g.origin[1] + (ey + 0.5) * g.h)
                    for ex, ey in free
                ]
            )
            radii = _convex_radii(self.boundary)
            if radii is not None:
                c, r_in, r_out = radii
                d = np.hypot(centers[:, 0] - c[0], centers[:, 1] - c[1])
                inside = d <= r_in * (1.0 - 1e-12)
                unsure = ~inside & (d < r_out * (1.0 + 1e-12))
                if unsure.any():
                    inside[unsure] = points_in_polygon(centers[unsure], self.boundary)
            else:
                inside = points_in_polygon(centers, self.boundary)
            for (ex, ey), ok in zip(free, inside):
                classes[ex, ey] = INTERIOR if ok else OUTSIDE

        self.classes = classes
        self.cut_polys = cut_polys
        self._edge_buckets = buckets

    def _extract_segments(self):
        """Split every boundary edge along gridlines and attach the pieces to
        elements (midpoints decide, clamped so fitted boundaries land on the
        innermost element row)."""
        g = self.grid
        segments = {}
        for a, b in self._edge_list():
            d = b - a
            length = float(np.hypot(*d))
            if length == 0.0:
                continue
            tangent = d / length
            normal = np.array([tangent[1], -tangent[0]])
            ts = [0.0] + _split_edge_by_gridlines(a, b, g) + [1.0]
            for t0, t1 in zip(ts[:-1], ts[1:]):
                if t1 <= t0:
                    continue
                pa = a + t0 * d
                pb = a + t1 * d
                mid = 0.5 * (pa + pb)
                elem = g.cell_of(mid)
                seg = BoundarySegment(pa, pb, normal, tangent)
                if seg.length > 0.0:
                    segments.setdefault(elem, []).append(seg)
        self.segments = segments

    def _build_stab_mask(self):
        g = self.grid
        bnd = np.zeros((g.nx, g.ny), dtype=bool)
        for ex, ey in self.segments:
            bnd[ex, ey] = True
        stab = bnd.copy()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                sx = slice(max(dx, 0), g.nx + min(dx, 0))
                tx = slice(max(-dx, 0), g.nx + min(-dx, 0))
                sy = slice(max(dy, 0), g.ny + min(dy, 0))
                ty = slice(max(-dy, 0), g.ny + min(-dy, 0))
                stab[tx, ty] |= bnd[sx, sy]
        self.boundary_mask = bnd
        self.stab_mask = stab

    # -- queries -----------------------------------------------------------

    @property
    def h(self):
        return self.grid.h

    def element_class(self, elem):
        return int(self.classes[elem])

    def inside_mask(self):
        """Bool (nx, ny) mask of non-Outside elements."""
        return self.classes != OUTSIDE

    def clipped_polygon(self, elem):
        """Element-domain intersection polygon (the full box for Interior)."""
        cls = self.classes[elem]
        if cls == CUT:
            return self.cut_polys[elem]
        if cls == INTERIOR:
            return self.grid.element_vertices(*elem)
        return np.zeros((0, 2))

    def clipped_area(self, elem):
        return polygon_area(self.clipped_polygon(elem))

    def boundary_segments(self, elem):
        return self.segments.get(tuple(elem), [])

    def elements(self, classes=None):
        """Element index iterator in row-major order, optionally filtered."""
        for ex in range(self.grid.nx):
            for ey in range(self.grid.ny):
                if classes is None or self.classes[ex, ey] in classes:
                    yield (ex, ey)

    def polygon_area(self):
        return polygon_area(self.boundary)

    def perimeter(self):
        d = np.diff(np.vstack([self.boundary, self.boundary[:1]]), axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def with_stab_mask(self, mask):
        """Copy of this domain with the stabilization band overridden (used by
        the fixed-method eigenvalue study)."""
        other = object.__new__(ImmersedDomain)
        other.__dict__.update(self.__dict__)
        other.stab_mask = np.asarray(mask, dtype=bool).copy()
        return other

    def export_text(self):
        """One line per non-Outside element: `ex ey x1 y1 x2 y2 ...` of its
        clipped polygon (debug/plotting aid)."""
        lines = []
        for elem in self.elements(classes=(INTERIOR, CUT)):
            poly = self.clipped_polygon(elem)
            coords = " ".join(f"{v:.17g}" for v in poly.ravel())
            lines.append(f"{elem[0]} {elem[1]} {coords}")
        return "\n".join(lines) + "\n"


# -- constructors ------------------------------------------------------------


def make_unit_square_domain(n, delta_cut=0.0):
    """Unit square on an n-by-n grid; the topmost and rightmost element rows
    extend a fraction ``delta_cut`` of their size beyond the boundary.

    ``h = 1/(n - delta_cut)`` with the grid anchored at the origin, so
    ``delta_cut = 0`` is a perfectly fitted mesh.
    """
    if n < 3:
        raise ValueError("need at least 3 elements per side")
    if not 0.0 <= delta_cut < 1.0:
        raise ValueError("delta_cut must lie in [0, 1)")
    h = 1.0 / (n - delta_cut)
    grid = BackgroundGrid((0.0, 0.0), h, n, n)
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return ImmersedDomain(grid, square)


def make_unit_circle_domain(h, t=0.0, segments=4096):
    """Unit disk (as an inscribed regular polygon) on a background grid of
    size ``h`` shifted by ``(t*h, t*h/3)``, covering the disk with at least
    one element of margin."""
    if segments < 64:
        raise ValueError("need at least 64 boundary segments")
    if not 0.0 < h < 1.0:
        raise ValueError("h must lie in (0, 1)")
    ang = 2.0 * np.pi * np.arange(segments) / segments
    poly = np.column_stack([np.cos(ang), np.sin(ang)])
    sx, sy = t * h, t * h / 3.0
    mx = math.ceil((1.0 + h + sx) / h)
    my = math.ceil((1.0 + h + sy) / h)
    ox, oy = sx - mx * h, sy - my * h
    nx = math.ceil((1.0 + h - ox) / h)
    ny = math.ceil((1.0 + h - oy) / h)
    grid = BackgroundGrid((ox, oy), h, nx, ny)
    return ImmersedDomain(grid, poly)


# -- functional views of the spec operations ---------------------------------


def classify_elements(domain):
    """Per-element classification array (nx, ny) with INTERIOR/CUT/OUTSIDE."""
    return domain.classes


def extract_stab_subdomain(domain):
    """Elements of the stabilization band: boundary-intersecting elements and
    their 8-neighbors."""
    ex, ey = np.nonzero(domain.stab_mask)
    return [(int(a), int(b)) for a, b in zip(ex, ey)]


def boundary_segments_in_element(domain, elem):
    """Boundary pieces inside one element with outward normals/tangents."""
    return domain.boundary_segments(elem)
