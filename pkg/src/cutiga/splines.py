"""Uniform tensor-product B-spline spaces of degree p >= 2 (C^{p-1} smooth).

Bases live on an infinite uniform knot line ``knot_j = x0 + j*h``; no knot is
ever repeated, so functions crossing the domain boundary are ordinary interior
basis functions.  Evaluation uses the Cox-de Boor recursion specialized to
uniform spacing, with the standard difference recursions for first and second
derivatives.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SplineSpace1D", "TensorSplineSpace"]


def _levels(t, p):
    """Cox-de Boor pyramid at local coordinates ``t`` in [0, 1).

    Returns the list of per-degree value arrays ``lvl[q]`` of shape
    ``(len(t), q+1)`` where column ``j`` holds ``phi_{k-q+j, q}`` evaluated at
    ``x = (k + t) * h`` (knot units; element index k drops out on uniform
    knots).
    """
    t = np.asarray(t, dtype=float)
    lvl = [np.ones((t.shape[0], 1))]
    for q in range(1, p + 1):
        prev = lvl[-1]
        cur = np.zeros((t.shape[0], q + 1))
        for j in range(q + 1):
            left = (t + (q - j)) * prev[:, j - 1] if j >= 1 else 0.0
            right = ((j + 1) - t) * prev[:, j] if j <= q - 1 else 0.0
            cur[:, j] = (left + right) / q
        lvl.append(cur)
    return lvl


def uniform_tables(t, p, h):
    """Values and first/second derivatives of the p+1 basis functions that are
    nonzero on an element, at local coordinates ``t`` in [0, 1).

    Returns ``(V, D1, D2)``, each of shape ``(len(t), p+1)``; column ``j``
    corresponds to basis index ``k - p + j`` on element ``k``.  Derivatives are
    physical (scaled by 1/h and 1/h^2).
    """
    if p < 2:
        raise ValueError("degree must be >= 2")
    lvl = _levels(t, p)
    n = lvl[0].shape[0]
    V = lvl[p]
    a = lvl[p - 1]
    D1 = np.zeros((n, p + 1))
    for j in range(p + 1):
        lo = a[:, j - 1] if j >= 1 else 0.0
        hi = a[:, j] if j <= p - 1 else 0.0
        D1[:, j] = (lo - hi) / h
    b = lvl[p - 2]
    D2 = np.zeros((n, p + 1))
    for j in range(p + 1):
        t0 = b[:, j - 2] if j >= 2 else 0.0
        t1 = b[:, j - 1] if 1 <= j <= p - 1 else 0.0
        t2 = b[:, j] if j <= p - 2 else 0.0
        D2[:, j] = (t0 - 2.0 * t1 + t2) / (h * h)
    return V, D1, D2


class SplineSpace1D:
    """Degree-p B-spline basis on the uniform knots ``x0 + j*h``.

    Basis function ``i`` is supported on ``[x_i, x_{i+p+1}]`` (p+1 elements);
    indices ``i_min..i_max`` are the functions whose support meets the grid
    cover ``[x0, x0 + n_elem*h]``.  Immutable; evaluation is pure.
    """

    def __init__(self, p, h, x0, n_elem):
        if p < 2:
            raise ValueError("degree must be >= 2 (C^1 smoothness required)")
        if h <= 0:
            raise ValueError("mesh size must be positive")
        self.p = int(p)
        self.h = float(h)
        self.x0 = float(x0)
        self.n_elem = int(n_elem)
        self.i_min = -self.p
        self.i_max = self.n_elem - 1

    @property
    def n_basis(self):
        return self.n_elem + self.p

    def knot(self, j):
        return self.x0 + j * self.h

    def support(self, i):
        """Support interval [x_i, x_{i+p+1}] of basis function i."""
        return self.knot(i), self.knot(i + self.p + 1)

    def element_of(self, x, clamp=True):
        """Knot-interval index containing x (vectorized).

        With ``clamp`` the index is restricted to the grid cover so that
        points exactly on the top gridline take left-limit values (the basis
        is C^{p-1}, so the value is unchanged).
        """
        k = np.floor((np.asarray(x, dtype=float) - self.x0) / self.h).astype(int)
        if clamp:
            k = np.clip(k, 0, self.n_elem - 1)
        return k

    def tables(self, x, clamp=True):
        """Per-point element index and nonzero-basis tables.

        Returns ``(k, V, D1, D2)`` where column ``j`` of the tables belongs to
        basis index ``k - p + j``.
        """
        x = np.asarray(x, dtype=float)
        k = self.element_of(x, clamp=clamp)
        t = (x - self.x0) / self.h - k
        V, D1, D2 = uniform_tables(t, self.p, self.h)
        return k, V, D1, D2

    def eval_one(self, i, x, max_deriv=2):
        """Value and derivatives of basis function ``i`` at scalar ``x``.

        Returns a tuple of length ``max_deriv + 1``; identically zero outside
        the support ``[x_i, x_{i+p+1}]``.
        """
        if not 0 <= max_deriv <= 2:
            raise ValueError("max_deriv must be 0, 1 or 2")
        lo, hi = self.support(i)
        out = (0.0, 0.0, 0.0)
        if lo <= x < hi:
            k = int(np.floor((x - self.x0) / self.h))
            j = i - k + self.p
            if 0 <= j <= self.p:
                t = np.array([(x - self.x0) / self.h - k])
                V, D1, D2 = uniform_tables(t, self.p, self.h)
                out = (float(V[0, j]), float(D1[0, j]), float(D2[0, j]))
        return out[: max_deriv + 1]


class TensorSplineSpace:
    """Tensor-product space with the active index set B.

    B holds exactly the multi-indices ``(i1, i2)`` whose support box has a
    positive-area intersection with the domain; the predicate is inherited
    from the domain's element classification (an element survives
    classification iff its clipped area is positive), so the spline and
    geometry modules share one source of geometric truth.  DOF numbering is
    the lexicographic enumeration of B.  Immutable after construction.
    """

    def __init__(self, sx, sy, active_mask, grid=None):
        self.sx = sx
        self.sy = sy
        self.p = sx.p
        if sy.p != sx.p:
            raise ValueError("anisotropic degrees not supported")
        self.grid = grid
        self.active_mask = active_mask
        # dense numbering: dof_grid[a1, a2] = dof id or -1, a = i + p
        self.dof_grid = -np.ones(active_mask.shape, dtype=int)
        a1, a2 = np.nonzero(active_mask)
        self.dof_grid[a1, a2] = np.arange(a1.size)
        self.indices = [
            (int(i1) - self.p, int(i2) - self.p) for i1, i2 in zip(a1, a2)
        ]

    @classmethod
    def for_domain(cls, domain, p):
        """Space over the domain's background grid, active set from its
        element classification (non-Outside elements)."""
        grid = domain.grid
        sx = SplineSpace1D(p, grid.h, grid.origin[0], grid.nx)
        sy = SplineSpace1D(p, grid.h, grid.origin[1], grid.ny)
        elem = domain.inside_mask()  # (nx, ny) bool, True for Interior|Cut
        # basis (i1,i2) supports elements i..i+p in each axis
        n1, n2 = grid.nx + p, grid.ny + p
        active = np.zeros((n1, n2), dtype=bool)
        for dx in range(p + 1):
            for dy in range(p + 1):
                # element (e1,e2) activates basis offsets (e1+p-dx, e2+p-dy)
                active[dx : dx + grid.nx, dy : dy + grid.ny] |= elem
        return cls(sx, sy, active, grid=grid)

    @property
    def n_dofs(self):
        return len(self.indices)

    def dof_of(self, idx):
        """Dense DOF id of multi-index ``idx`` (or -1 if inactive)."""
        a1, a2 = idx[0] + self.p, idx[1] + self.p
        if 0 <= a1 < self.dof_grid.shape[0] and 0 <= a2 < self.dof_grid.shape[1]:
            return int(self.dof_grid[a1, a2])
        return -1

    def is_active(self, idx):
        return self.dof_of(idx) >= 0

    def active_basis_on_element(self, elem):
        """Multi-indices of B supported on element ``elem = (ex, ey)``."""
        ex, ey = elem
        out = []
        for i1 in range(ex - self.p, ex + 1):
            for i2 in range(ey - self.p, ey + 1):
                if self.is_active((i1, i2)):
                    out.append((i1, i2))
        return out

    def window_dofs(self, elem):
        """Dense DOF ids of the (p+1)^2 window of element ``elem``; -1 marks
        inactive slots.  Order: j = jx*(p+1) + jy with i = e - p + j."""
        ex, ey = elem
        m = self.p + 1
        out = np.empty(m * m, dtype=int)
        for jx in range(m):
            for jy in range(m):
                out[jx * m + jy] = self.dof_of((ex - self.p + jx, ey - self.p + jy))
        return out

    def element_tables(self, elem, pts):
        """Value/gradient/Laplacian tables of the element window at points.

        ``pts`` has shape (n, 2) and must lie inside element ``elem``.
        Returns ``(val, gx, gy, lap)`` each of shape (n, (p+1)^2) in window
        order, including inactive slots (mask with :meth:`window_dofs`).
        """
        pts = np.asarray(pts, dtype=float)
        ex, ey = elem
        tx = (pts[:, 0] - self.sx.x0) / self.sx.h - ex
        ty = (pts[:, 1] - self.sy.x0) / self.sy.h - ey
        Vx, D1x, D2x = uniform_tables(tx, self.p, self.sx.h)
        Vy, D1y, D2y = uniform_tables(ty, self.p, self.sy.h)
        val = np.einsum("na,nb->nab", Vx, Vy)
        gx = np.einsum("na,nb->nab", D1x, Vy)
        gy = np.einsum("na,nb->nab", Vx, D1y)
        lap = np.einsum("na,nb->nab", D2x, Vy) + np.einsum("na,nb->nab", Vx, D2y)
        n = pts.shape[0]
        m = (self.p + 1) ** 2
        return (
            val.reshape(n, m),
            gx.reshape(n, m),
            gy.reshape(n, m),
            lap.reshape(n, m),
        )

    def eval_basis_2d(self, idx, pt):
        """Single basis function: value, gradient, Laplacian and Hessian.

        Zero tuple when ``pt`` is outside the support box of ``idx``.
        """
        i1, i2 = idx
        vx = self.sx.eval_one(i1, pt[0], max_deriv=2)
        vy = self.sy.eval_one(i2, pt[1], max_deriv=2)
        value = vx[0] * vy[0]
        grad = np.array([vx[1] * vy[0], vx[0] * vy[1]])
        hess = np.array(
            [[vx[2] * vy[0], vx[1] * vy[1]], [vx[1] * vy[1], vx[0] * vy[2]]]
        )
        return value, grad, hess[0, 0] + hess[1, 1], hess
