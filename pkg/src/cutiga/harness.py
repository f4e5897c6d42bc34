"""Experiment drivers: convergence on fitted/cut squares, worst-case
convergence over shifted circle grids, the condition-number sweep, and the
fixed-method smallest-eigenvalue study.

All runs are deterministic (fixed accumulation order, no randomness); wall
times are recorded but never compared.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .assembly import (
    LS,
    STANDARD,
    FormBlocks,
    MethodParams,
    ProblemData,
    basis_energy_norms,
    error_norms,
)
from .geometry import make_unit_circle_domain, make_unit_square_domain
from .linalg import (
    FactorizationError,
    basis_removal,
    embed_solution,
    restrict_system,
    solve_spd,
    sym_eigen_extremes,
)
from .splines import TensorSplineSpace

__all__ = [
    "ManufacturedProblem",
    "default_problem",
    "linear_problem",
    "RunRecord",
    "StudyResult",
    "convergence_rate",
    "run_convergence_fitted_square",
    "run_convergence_cut_square",
    "run_worst_case_circle",
    "run_condition_study",
    "run_fixed_method_eigen_study",
    "solve_circle_case",
    "solve_square_case",
    "CIRCLE_MESH_SIZES",
    "SQUARE_MESH_SIZES",
]

SQUARE_MESH_SIZES = (8, 16, 32, 64)
CIRCLE_MESH_SIZES = (0.26, 0.13, 0.065, 0.0325)


# -- manufactured solutions ----------------------------------------------------


def _u_ansatz(x, y):
    return 0.1 * (np.sin(2.0 * x) + x * np.cos(3.0 * y))


def _grad_ansatz(x, y):
    return (
        0.1 * (2.0 * np.cos(2.0 * x) + np.cos(3.0 * y)),
        0.1 * (-3.0 * x * np.sin(3.0 * y)),
    )


def _lap_ansatz(x, y):
    return 0.1 * (-4.0 * np.sin(2.0 * x) - 9.0 * x * np.cos(3.0 * y))


def _u_linear(x, y):
    return x + 2.0 * y


def _grad_linear(x, y):
    return (np.ones_like(np.asarray(x, dtype=float)), np.full_like(np.asarray(x, dtype=float), 2.0))


def _lap_linear(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ManufacturedProblem:
    """Closed-form solution with its first two derivatives; the problem data
    f = -lap(u), g = u and grad g = grad u are derived from it."""

    u: Callable
    grad_u: Callable
    lap_u: Callable

    def f(self, x, y):
        return -np.asarray(self.lap_u(x, y), dtype=float)

    def data(self):
        return ProblemData(f=self.f, g=self.u, grad_g=self.grad_u)

    def check_consistency(self, n=10_000, seed=0, box=((-1.0, 1.0), (-1.0, 1.0))):
        """max |f + lap u| over random points (should be ~1e-16)."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(*box[0], n)
        y = rng.uniform(*box[1], n)
        return float(np.abs(self.f(x, y) + np.asarray(self.lap_u(x, y))).max())


def default_problem():
    """The sin/cos ansatz used by all model problems."""
    return ManufacturedProblem(_u_ansatz, _grad_ansatz, _lap_ansatz)


def linear_problem():
    """u = x + 2y, reproducible by the spline space (patch test)."""
    return ManufacturedProblem(_u_linear, _grad_linear, _lap_linear)


# -- records ------------------------------------------------------------------


@dataclass
class RunRecord:
    geometry: str
    variant: str
    h: float
    n: int | None = None
    t: float | None = None
    delta_cut: float | None = None
    tau: float = 0.1
    beta: float = 10.0
    c: float = 0.0
    refinement: int | None = None
    l2: float | None = None
    h1: float | None = None
    energy: float | None = None
    n_dofs: int | None = None
    n_removed: int | None = None
    lam_min: float | None = None
    lam_max: float | None = None
    kappa: float | None = None
    lam_min_br: float | None = None
    kappa_br: float | None = None
    failed: str | None = None
    wall_time: float = 0.0


CSV_COLUMNS = list(RunRecord.__dataclass_fields__)


@dataclass
class StudyResult:
    """Records of one study plus the metadata needed to rerun it."""

    study: str
    metadata: dict
    records: list = field(default_factory=list)

    def worst_case(self, metric):
        """(h, max over shifts) pairs, h descending; failures count as inf."""
        per_h: dict[float, float] = {}
        for r in self.records:
            v = math.inf if r.failed else getattr(r, metric)
            per_h[r.h] = max(per_h.get(r.h, -math.inf), v)
        return sorted(per_h.items(), reverse=True)

    def series(self, metric):
        """(h, value) pairs in record order (one record per h)."""
        return [(r.h, getattr(r, metric)) for r in self.records]

    def rates(self, metric, worst=False):
        pairs = self.worst_case(metric) if worst else self.series(metric)
        out = []
        for (h0, e0), (h1, e1) in zip(pairs[:-1], pairs[1:]):
            out.append(convergence_rate(e0, e1, h0, h1))
        return out

    def to_csv(self, path):
        lines = [",".join(CSV_COLUMNS)]
        for r in self.records:
            row = []
            for col in CSV_COLUMNS:
                v = getattr(r, col)
                if v is None:
                    row.append("")
                elif isinstance(v, float):
                    row.append(f"{v:.17g}")
                else:
                    row.append(str(v))
            lines.append(",".join(row))
        _atomic_write(path, "\n".join(lines) + "\n")

    def to_json(self, path):
        payload = {
            "study": self.study,
            "metadata": self.metadata,
            "records": [asdict(r) for r in self.records],
        }
        _atomic_write(path, json.dumps(payload, indent=1, allow_nan=True) + "\n")


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def convergence_rate(e_coarse, e_fine, h_coarse, h_fine):
    """log(e_coarse/e_fine) / log(h_coarse/h_fine)."""
    if e_coarse <= 0 or e_fine <= 0 or not (math.isfinite(e_coarse) and math.isfinite(e_fine)):
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def study_filename(study, variant, tau, beta, ext="csv"):
    return f"{study}_{variant}_tau{tau:g}_beta{beta:g}.{ext}"


# -- single cases ---------------------------------------------------------------


def solve_square_case(n, delta_cut, params, problem):
    """Assemble/solve the unit-square model problem (no basis removal)."""
    t0 = time.perf_counter()
    dom = make_unit_square_domain(n, delta_cut)
    space = TensorSplineSpace.for_domain(dom, params.p)
    blocks = FormBlocks(space, dom, problem.data())
    sysm = blocks.combine(params)
    rec = RunRecord(
        geometry="square",
        variant=params.variant,
        h=dom.h,
        n=n,
        delta_cut=delta_cut,
        tau=params.tau,
        beta=params.beta,
        c=0.0,
        n_dofs=space.n_dofs,
        n_removed=0,
    )
    try:
        x = solve_spd(sysm.A, sysm.b)
    except FactorizationError as exc:
        rec.failed = str(exc)
        rec.wall_time = time.perf_counter() - t0
        return rec, None
    rec.l2, rec.h1, rec.energy = error_norms(
        space, x, problem.u, problem.grad_u, problem.lap_u, dom, params
    )
    rec.wall_time = time.perf_counter() - t0
    return rec, (space, dom, x)


def solve_circle_case(h, t, params, problem, removal=True):
    """Assemble/solve the unit-circle model problem with basis removal."""
    t0 = time.perf_counter()
    dom = make_unit_circle_domain(h, t)
    space = TensorSplineSpace.for_domain(dom, params.p)
    blocks = FormBlocks(space, dom, problem.data())
    sysm = blocks.combine(params)
    rec = RunRecord(
        geometry="circle",
        variant=params.variant,
        h=h,
        t=t,
        tau=params.tau,
        beta=params.beta,
        c=params.removal_c if removal else 0.0,
        n_dofs=space.n_dofs,
    )
    try:
        if removal:
            norms = basis_energy_norms(space, dom, params, blocks=blocks)
            report = basis_removal(norms, params.removal_c, dom.h, params.p)
            reduced = restrict_system(sysm, report)
            x = embed_solution(solve_spd(reduced.A, reduced.b), report, space.n_dofs)
            rec.n_removed = int(report.removed.size)
        else:
            x = solve_spd(sysm.A, sysm.b)
            rec.n_removed = 0
    except FactorizationError as exc:
        rec.failed = str(exc)
        rec.wall_time = time.perf_counter() - t0
        return rec, None
    rec.l2, rec.h1, rec.energy = error_norms(
        space, x, problem.u, problem.grad_u, problem.lap_u, dom, params
    )
    rec.wall_time = time.perf_counter() - t0
    return rec, (space, dom, x)


def _circle_worker(args):
    h, t, params, problem = args
    rec, _ = solve_circle_case(h, t, params, problem)
    return rec


# -- studies --------------------------------------------------------------------


def run_convergence_fitted_square(params, mesh_sizes=SQUARE_MESH_SIZES, problem=None):
    """Manufactured-solution convergence on perfectly fitted meshes."""
    return run_convergence_cut_square(params, mesh_sizes, 0.0, problem)


def run_convergence_cut_square(params, mesh_sizes=SQUARE_MESH_SIZES, delta_cut=0.0, problem=None):
    """Convergence on the controlled-cut square meshes (no basis removal)."""
    problem = problem or default_problem()
    result = StudyResult(
        study="convergence-square",
        metadata={
            "delta_cut": delta_cut,
            "variant": params.variant,
            "tau": params.tau,
            "beta": params.beta,
            "mesh_sizes": list(mesh_sizes),
        },
    )
    for n in mesh_sizes:
        rec, _ = solve_square_case(n, delta_cut, params, problem)
        result.records.append(rec)
    return result


def run_worst_case_circle(
    params, mesh_sizes=CIRCLE_MESH_SIZES, n_shifts=100, problem=None, jobs=1
):
    """Worst-case convergence over shifted circle grids, basis removal on.

    For each mesh size the background grid is shifted to ``n_shifts``
    positions t = k/(n_shifts-1); the study records every shift and the
    worst-case aggregation lives in :meth:`StudyResult.worst_case`.
    """
    problem = problem or default_problem()
    result = StudyResult(
        study="convergence-circle-worst",
        metadata={
            "variant": params.variant,
            "tau": params.tau,
            "beta": params.beta,
            "c": params.removal_c,
            "mesh_sizes": list(mesh_sizes),
            "n_shifts": n_shifts,
        },
    )
    shifts = [k / (n_shifts - 1) for k in range(n_shifts)] if n_shifts > 1 else [0.0]
    tasks = [(h, t, params, problem) for h in mesh_sizes for t in shifts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            result.records.extend(pool.map(_circle_worker, tasks, chunksize=4))
    else:
        result.records.extend(_circle_worker(task) for task in tasks)
    return result


def run_condition_study(params, h=0.13, n_shifts=100):
    """Condition numbers and smallest eigenvalues across the shift sweep,
    before and after basis removal, for both variants.

    The removal set is computed once per shift from the energy norms (shared
    by both variants so the comparison isolates the method difference).
    """
    result = StudyResult(
        study="condition",
        metadata={
            "h": h,
            "n_shifts": n_shifts,
            "tau": params.tau,
            "beta": params.beta,
            "c": params.removal_c,
        },
    )
    shifts = [k / (n_shifts - 1) for k in range(n_shifts)] if n_shifts > 1 else [0.0]
    for t in shifts:
        t0 = time.perf_counter()
        dom = make_unit_circle_domain(h, t)
        space = TensorSplineSpace.for_domain(dom, params.p)
        blocks = FormBlocks(space, dom, data=None)
        norms = basis_energy_norms(space, dom, params, blocks=blocks)
        report = basis_removal(norms, params.removal_c, dom.h, params.p)
        for variant in (LS, STANDARD):
            pars = replace(params, variant=variant)
            A = blocks.combine(pars).A
            lam_min, lam_max = sym_eigen_extremes(A)
            rec = RunRecord(
                geometry="circle",
                variant=variant,
                h=h,
                t=t,
                tau=params.tau,
                beta=params.beta,
                c=params.removal_c,
                n_dofs=space.n_dofs,
                n_removed=int(report.removed.size),
                lam_min=lam_min,
                lam_max=lam_max,
                kappa=lam_max / lam_min if lam_min > 0 else math.inf,
            )
            Ar = A[report.kept][:, report.kept].tocsr()
            lam_min_br, lam_max_br = sym_eigen_extremes(Ar)
            rec.lam_min_br = lam_min_br
            rec.kappa_br = lam_max_br / lam_min_br if lam_min_br > 0 else math.inf
            rec.wall_time = time.perf_counter() - t0
            result.records.append(rec)
    return result


def _coarse_band_on_fine(coarse, fine_n, delta_cut, base_n):
    """Fine-mesh membership mask of the coarse stabilization band (by cell
    centers; the cut-mesh construction is not nested, so the region is only
    asymptotically fixed)."""
    h_f = 1.0 / (fine_n - delta_cut)
    h_c = coarse.h
    mask = np.zeros((fine_n, fine_n), dtype=bool)
    for i in range(fine_n):
        ci = min(max(int((i + 0.5) * h_f / h_c), 0), base_n - 1)
        for j in range(fine_n):
            cj = min(max(int((j + 0.5) * h_f / h_c), 0), base_n - 1)
            mask[i, j] = coarse.stab_mask[ci, cj]
    return mask


def run_fixed_method_eigen_study(
    base_n=10,
    refinements=(1, 2, 4, 8),
    delta_cuts=(0.0, 0.5, 0.9),
    taus=(1.0, 0.1),
    beta=10.0,
    p=2,
    dense_threshold=8000,
):
    """Freeze the method on the base grid (its h in every coefficient and its
    stabilization band as a geometric region) and track the smallest stiffness
    eigenvalue while the computational mesh refines."""
    result = StudyResult(
        study="eigenstudy",
        metadata={
            "base_n": base_n,
            "refinements": list(refinements),
            "delta_cuts": list(delta_cuts),
            "taus": list(taus),
            "beta": beta,
        },
    )
    for delta_cut in delta_cuts:
        coarse = make_unit_square_domain(base_n, delta_cut)
        h_method = coarse.h
        for r in refinements:
            n = base_n * r
            t0 = time.perf_counter()
            dom = make_unit_square_domain(n, delta_cut)
            if r > 1:
                dom = dom.with_stab_mask(_coarse_band_on_fine(coarse, n, delta_cut, base_n))
            space = TensorSplineSpace.for_domain(dom, p)
            blocks = FormBlocks(space, dom, data=None)
            for tau in taus:
                for variant in (LS, STANDARD):
                    pars = MethodParams(p=p, beta=beta, tau=tau, delta=h_method, variant=variant)
                    A = blocks.combine(pars).A
                    lam_min, lam_max = sym_eigen_extremes(A, dense_threshold)
                    result.records.append(
                        RunRecord(
                            geometry="square",
                            variant=variant,
                            h=dom.h,
                            n=n,
                            delta_cut=delta_cut,
                            tau=tau,
                            beta=beta,
                            refinement=r,
                            n_dofs=space.n_dofs,
                            lam_min=lam_min,
                            lam_max=lam_max,
                            wall_time=time.perf_counter() - t0,
                        )
                    )
    return result
