"""Assembly of the least-squares stabilized Nitsche system and the standard
symmetric Nitsche baseline.

The bilinear form splits into parameter-independent Gram blocks

* volume:      (grad v, grad w) over the domain,
* ls bulk:     (lap v, lap w) over the stabilization band (scaled tau*delta^2),
* consistency: -(n.grad v, w) - (v, n.grad w) on the boundary,
* penalty 0:   (v, w) on the boundary (scaled beta*(2+1/tau)/delta),
* penalty 1:   (grad_T v, grad_T w) on the boundary (scaled 2*beta*delta),

which are assembled once per (space, domain, data) and combined per method
variant.  Every local block is made exactly symmetric before scatter, so the
assembled matrices satisfy A == A.T exactly.  Element sweep order is fixed
(row-major) for bit reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import CUT, INTERIOR
from .quadrature import QuadRule, cut_cell_rule, gauss_segment
from .splines import uniform_tables

__all__ = [
    "MethodParams",
    "ProblemData",
    "SystemMatrices",
    "FormBlocks",
    "assemble",
    "assemble_standard",
    "basis_energy_norms",
    "energy_gram",
    "evaluate_solution",
    "evaluate_solution_many",
    "error_norms",
    "export_matrix_text",
    "export_vector_text",
]

LS = "ls"
STANDARD = "standard"


@dataclass(frozen=True)
class MethodParams:
    """Every knob of the method.

    ``delta`` is the band-width/scaling length; None means "use the grid h",
    which is the paper's default.  It is carried separately so the frozen
    method of the coercivity study can keep delta at its coarse-grid value.
    """

    p: int = 2
    beta: float = 10.0
    tau: float = 0.1
    delta: float | None = None
    variant: str = LS
    removal_c: float = 0.01

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.beta <= 0 or self.tau <= 0:
            raise ValueError("beta and tau must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.variant not in (LS, STANDARD):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.removal_c < 0:
            raise ValueError("removal constant must be nonnegative")

    def delta_for(self, domain):
        return self.delta if self.delta is not None else domain.h


@dataclass(frozen=True)
class ProblemData:
    """Source f on the domain, Dirichlet datum g and the full gradient of its
    extension on the boundary (the tangential part is projected out with the
    local segment normal)."""

    f: Callable
    g: Callable
    grad_g: Callable


class SystemMatrices:
    """Sparse symmetric system with the dense DOF numbering of the space."""

    def __init__(self, A, b, space):
        self.A = A
        self.b = b
        self.space = space

    @property
    def n(self):
        return self.b.shape[0]


def _quad_orders(p):
    # stiffness integrands for degree-p splines have per-axis degree <= 2p;
    # one extra order absorbs the Laplacian and tangential terms
    return p + 2, p + 2, p + 3  # volume tensor, cut-cell triangle, boundary


def _sym(block):
    """Exactly symmetric copy (upper triangle mirrored)."""
    return np.triu(block) + np.triu(block, 1).T


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add_block(self, dofs, block):
        act = dofs >= 0
        if not act.all():
            dofs = dofs[act]
            block = block[np.ix_(act, act)]
        if dofs.size == 0:
            return
        r = np.repeat(dofs, dofs.size)
        c = np.tile(dofs, dofs.size)
        self.rows.append(r)
        self.cols.append(c)
        self.vals.append(block.ravel())

    def matrix(self, n):
        if not self.rows:
            return sp.csr_matrix((n, n))
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        # stable duplicate summation: mirrored (i,j)/(j,i) streams see their
        # addends in the same element order, so A == A.T holds exactly
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        new = np.empty(r.size, dtype=bool)
        new[0] = True
        new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        starts = np.nonzero(new)[0]
        sums = np.add.reduceat(v, starts)
        A = sp.coo_matrix((sums, (r[starts], c[starts])), shape=(n, n))
        return A.tocsr()


def _eval2(pts, f):
    return np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)


def _boundary_rule(domain, elem, n_bnd):
    """All boundary quadrature points of one element, stacked into one rule."""
    segs = domain.boundary_segments(elem)
    if not segs:
        return None
    pts, wts, nrm, tng = [], [], [], []
    for seg in segs:
        r = gauss_segment(seg.a, seg.b, n_bnd, seg.normal, seg.tangent)
        if len(r):
            pts.append(r.points)
            wts.append(r.weights)
            nrm.append(r.normals)
            tng.append(r.tangents)
    if not pts:
        return None
    return QuadRule(np.vstack(pts), np.concatenate(wts), np.vstack(nrm), np.vstack(tng))


def _interior_reference(p, h, n_vol):
    """Tables of the interior element window at the tensor Gauss points
    (translation invariant on a uniform grid).

    Returns ``(W, VAL, GX, GY, LAP, off)`` where ``off`` are the point
    offsets from the element corner, in the same ordering as
    :func:`tensor_rule_full_element`.
    """
    from .quadrature import _gauss01

    s, w = _gauss01(n_vol)
    Vx, D1x, D2x = uniform_tables(s, p, h)
    val = np.einsum("aj,bk->abjk", Vx, Vx)
    gx = np.einsum("aj,bk->abjk", D1x, Vx)
    gy = np.einsum("aj,bk->abjk", Vx, D1x)
    lap = np.einsum("aj,bk->abjk", D2x, Vx) + np.einsum("aj,bk->abjk", Vx, D2x)
    nq, m = n_vol * n_vol, (p + 1) ** 2
    W = np.outer(w, w).ravel() * h * h
    off = np.column_stack([np.repeat(s, n_vol), np.tile(s, n_vol)]) * h
    return W, val.reshape(nq, m), gx.reshape(nq, m), gy.reshape(nq, m), lap.reshape(nq, m), off


class FormBlocks:
    """Parameter-independent Gram blocks and load pieces for one
    (space, domain, data) triple."""

    def __init__(self, space, domain, data=None):
        if space.grid != domain.grid:
            raise ValueError("space and domain live on different grids")
        self.space = space
        self.domain = domain
        self.data = data
        self._build()

    def _build(self):
        space, domain, data = self.space, self.domain, self.data
        n = space.n_dofs
        n_vol, n_cut, n_bnd = _quad_orders(space.p)

        t_vol, t_lsb = _Triplets(), _Triplets()
        t_cons, t_pen0, t_pen1 = _Triplets(), _Triplets(), _Triplets()
        f_vol = np.zeros(n)
        f_lsb = np.zeros(n)
        g_cons = np.zeros(n)
        g_pen0 = np.zeros(n)
        g_pen1 = np.zeros(n)

        W_ref, VAL_ref, GX_ref, GY_ref, LAP_ref, off = _interior_reference(
            space.p, domain.grid.h, n_vol
        )
        vol_ref = _sym(GX_ref.T @ (W_ref[:, None] * GX_ref) + GY_ref.T @ (W_ref[:, None] * GY_ref))
        lsb_ref = _sym(LAP_ref.T @ (W_ref[:, None] * LAP_ref))

        for elem in domain.elements():
            cls = domain.classes[elem]
            in_band = bool(domain.stab_mask[elem])
            dofs = space.window_dofs(elem)

            if cls == INTERIOR:
                t_vol.add_block(dofs, vol_ref)
                if in_band:
                    t_lsb.add_block(dofs, lsb_ref)
                if data is not None:
                    x0, y0, _ = domain.grid.element_box(*elem)
                    pts = off + (x0, y0)
                    fv = W_ref * _eval2(pts, data.f)
                    self._scatter_vec(f_vol, dofs, VAL_ref.T @ fv)
                    if in_band:
                        self._scatter_vec(f_lsb, dofs, LAP_ref.T @ fv)
            elif cls == CUT:
                rule = cut_cell_rule(domain.cut_polys[elem], n_cut)
                if len(rule):
                    val, gx, gy, lap = space.element_tables(elem, rule.points)
                    w = rule.weights[:, None]
                    t_vol.add_block(dofs, _sym(gx.T @ (w * gx) + gy.T @ (w * gy)))
                    if in_band:
                        t_lsb.add_block(dofs, _sym(lap.T @ (w * lap)))
                    if data is not None:
                        fv = rule.weights * _eval2(rule.points, data.f)
                        self._scatter_vec(f_vol, dofs, val.T @ fv)
                        if in_band:
                            self._scatter_vec(f_lsb, dofs, lap.T @ fv)

            brule = _boundary_rule(domain, elem, n_bnd)
            if brule is not None:
                val, gx, gy, _ = space.element_tables(elem, brule.points)
                ng = brule.normals[:, :1] * gx + brule.normals[:, 1:] * gy
                tg = brule.tangents[:, :1] * gx + brule.tangents[:, 1:] * gy
                w = brule.weights[:, None]
                t_cons.add_block(dofs, _sym(-(ng.T @ (w * val)) - val.T @ (w * ng)))
                t_pen0.add_block(dofs, _sym(val.T @ (w * val)))
                t_pen1.add_block(dofs, _sym(tg.T @ (w * tg)))
                if data is not None:
                    gv = brule.weights * _eval2(brule.points, data.g)
                    gg = data.grad_g(brule.points[:, 0], brule.points[:, 1])
                    tgg = brule.tangents[:, 0] * np.asarray(gg[0], dtype=float) + brule.tangents[
                        :, 1
                    ] * np.asarray(gg[1], dtype=float)
                    self._scatter_vec(g_cons, dofs, ng.T @ gv)
                    self._scatter_vec(g_pen0, dofs, val.T @ gv)
                    self._scatter_vec(g_pen1, dofs, tg.T @ (brule.weights * tgg))

        self.vol = t_vol.matrix(n)
        self.lsb = t_lsb.matrix(n)
        self.cons = t_cons.matrix(n)
        self.pen0 = t_pen0.matrix(n)
        self.pen1 = t_pen1.matrix(n)
        self.f_vol, self.f_lsb = f_vol, f_lsb
        self.g_cons, self.g_pen0, self.g_pen1 = g_cons, g_pen0, g_pen1

    @staticmethod
    def _scatter_vec(target, dofs, contrib):
        act = dofs >= 0
        np.add.at(target, dofs[act], contrib[act])

    # -- combinations --------------------------------------------------------

    def combine(self, params):
        """System matrices for the requested variant."""
        delta = params.delta_for(self.domain)
        beta, tau = params.beta, params.tau
        pen_scale = beta * (2.0 + 1.0 / tau) / delta
        if params.variant == LS:
            A = (
                self.vol
                + (tau * delta * delta) * self.lsb
                + self.cons
                + pen_scale * self.pen0
                + (2.0 * beta * delta) * self.pen1
            )
            b = (
                self.f_vol
                - (tau * delta * delta) * self.f_lsb
                - self.g_cons
                + pen_scale * self.g_pen0
                + (2.0 * beta * delta) * self.g_pen1
            )
        else:
            A = self.vol + self.cons + pen_scale * self.pen0
            b = self.f_vol - self.g_cons + pen_scale * self.g_pen0
        return SystemMatrices(A.tocsr(), b, self.space)

    def energy_gram(self, params):
        """Gram matrix of the energy norm (no beta factor on the boundary
        part, following the norm's definition)."""
        delta = params.delta_for(self.domain)
        tau = params.tau
        M = (
            self.vol
            + (tau * delta * delta) * self.lsb
            + ((2.0 + 1.0 / tau) / delta) * self.pen0
            + (2.0 * delta) * self.pen1
        )
        return M.tocsr()


def assemble(space, domain, params, data):
    """Assemble the system for ``params.variant`` (LS-stabilized by
    default)."""
    blocks = FormBlocks(space, domain, data)
    return blocks.combine(params)


def assemble_standard(space, domain, params, data):
    """Assemble the standard symmetric Nitsche system (penalty written
    beta*(2+1/tau)/h for easy comparison; no bulk or tangential terms)."""
    blocks = FormBlocks(space, domain, data)
    return blocks.combine(replace(params, variant=STANDARD))


def energy_gram(space, domain, params):
    return FormBlocks(space, domain, data=None).energy_gram(params)


def basis_energy_norms(space, domain, params, blocks=None):
    """Energy norm of every active basis function (ascending-DOF order)."""
    if blocks is None:
        M = energy_gram(space, domain, params)
    else:
        M = blocks.energy_gram(params)
    return np.sqrt(np.maximum(M.diagonal(), 0.0))


# -- evaluation and error norms ----------------------------------------------


def evaluate_solution_many(space, coeffs, pts):
    """Values and gradients of the discrete function at many points."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    kx = space.sx.element_of(pts[:, 0])
    ky = space.sy.element_of(pts[:, 1])
    vals = np.zeros(pts.shape[0])
    grads = np.zeros((pts.shape[0], 2))
    order = np.lexsort((ky, kx))
    i = 0
    while i < order.size:
        j = i
        e = (kx[order[i]], ky[order[i]])
        while j < order.size and kx[order[j]] == e[0] and ky[order[j]] == e[1]:
            j += 1
        sel = order[i:j]
        dofs = space.window_dofs(e)
        c = np.where(dofs >= 0, coeffs[np.maximum(dofs, 0)], 0.0)
        val, gx, gy, _ = space.element_tables(e, pts[sel])
        vals[sel] = val @ c
        grads[sel, 0] = gx @ c
        grads[sel, 1] = gy @ c
        i = j
    return vals, grads


def evaluate_solution(space, coeffs, pt):
    """Value and gradient of the discrete function at one point."""
    v, g = evaluate_solution_many(space, coeffs, np.asarray(pt, dtype=float)[None, :])
    return float(v[0]), g[0]


def error_norms(space, coeffs, u, grad_u, lap_u, domain, params):
    """L2, H1-seminorm and energy-norm errors against an exact solution.

    The energy norm combines the H1 seminorm over the domain, the scaled
    Laplacian mismatch over the stabilization band and the weighted boundary
    value / tangential-gradient mismatches.
    """
    n_vol, n_cut, n_bnd = _quad_orders(space.p)
    delta = params.delta_for(domain)
    tau = params.tau
    W_ref, VAL_ref, GX_ref, GY_ref, LAP_ref, off = _interior_reference(
        space.p, domain.grid.h, n_vol
    )
    l2 = 0.0
    h1 = 0.0
    lsq = 0.0
    bnd0 = 0.0
    bnd1 = 0.0
    for elem in domain.elements():
        cls = domain.classes[elem]
        if cls == INTERIOR:
            x0, y0, _ = domain.grid.element_box(*elem)
            pts, w = off + (x0, y0), W_ref
            val, gx, gy, lap = VAL_ref, GX_ref, GY_ref, LAP_ref
        elif cls == CUT:
            rule = cut_cell_rule(domain.cut_polys[elem], n_cut)
            if not len(rule):
                continue
            pts, w = rule.points, rule.weights
            val, gx, gy, lap = space.element_tables(elem, pts)
        else:
            pts = None
        if pts is not None:
            dofs = space.window_dofs(elem)
            c = np.where(dofs >= 0, coeffs[np.maximum(dofs, 0)], 0.0)
            x, y = pts[:, 0], pts[:, 1]
            ev = val @ c - np.asarray(u(x, y), dtype=float)
            gu = grad_u(x, y)
            egx = gx @ c - np.asarray(gu[0], dtype=float)
            egy = gy @ c - np.asarray(gu[1], dtype=float)
            l2 += float(w @ (ev * ev))
            h1 += float(w @ (egx * egx + egy * egy))
            if domain.stab_mask[elem]:
                el = lap @ c - np.asarray(lap_u(x, y), dtype=float)
                lsq += float(w @ (el * el))
        brule = _boundary_rule(domain, elem, n_bnd)
        if brule is not None:
            dofs = space.window_dofs(elem)
            c = np.where(dofs >= 0, coeffs[np.maximum(dofs, 0)], 0.0)
            val, gx, gy, _ = space.element_tables(elem, brule.points)
            x, y = brule.points[:, 0], brule.points[:, 1]
            ev = val @ c - np.asarray(u(x, y), dtype=float)
            gu = grad_u(x, y)
            egx = gx @ c - np.asarray(gu[0], dtype=float)
            egy = gy @ c - np.asarray(gu[1], dtype=float)
            et = brule.tangents[:, 0] * egx + brule.tangents[:, 1] * egy
            bnd0 += float(brule.weights @ (ev * ev))
            bnd1 += float(brule.weights @ (et * et))
    energy2 = h1 + tau * delta * delta * lsq
    energy2 += (2.0 + 1.0 / tau) / delta * bnd0 + 2.0 * delta * bnd1
    return np.sqrt(l2), np.sqrt(h1), np.sqrt(energy2)


# -- text export ---------------------------------------------------------------


def export_matrix_text(A):
    """Coordinate-format text, one `i j value` line per stored entry."""
    coo = sp.coo_matrix(A)
    lines = [f"{i} {j} {v:.17g}" for i, j, v in zip(coo.row, coo.col, coo.data)]
    return "\n".join(lines) + "\n"


def export_vector_text(b):
    return "\n".join(f"{v:.17g}" for v in np.asarray(b)) + "\n"
