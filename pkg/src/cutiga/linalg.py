"""Direct solves, basis function removal and symmetric eigen diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SystemMatrices

__all__ = [
    "FactorizationError",
    "EigenConvergenceError",
    "NotPositiveDefiniteError",
    "RemovalReport",
    "solve_spd",
    "basis_removal",
    "restrict_system",
    "embed_solution",
    "sym_eigen_extremes",
    "condition_number",
]

DENSE_EIGEN_THRESHOLD = 4000


class FactorizationError(RuntimeError):
    """Cholesky/LU breakdown (typically a non-positive-definite pivot)."""


class EigenConvergenceError(RuntimeError):
    """Lanczos iteration failed to converge; carries the best estimates."""

    def __init__(self, message, lam_min=None, lam_max=None):
        super().__init__(message)
        self.lam_min = lam_min
        self.lam_max = lam_max


class NotPositiveDefiniteError(RuntimeError):
    """Matrix has a nonpositive smallest eigenvalue; carries lambda_min."""

    def __init__(self, lam_min, lam_max):
        super().__init__(f"matrix is not positive definite (lambda_min = {lam_min:.6g})")
        self.lam_min = lam_min
        self.lam_max = lam_max


@dataclass(frozen=True)
class RemovalReport:
    """Outcome of basis function removal."""

    kept: np.ndarray  # ascending DOF ids
    removed: np.ndarray  # ascending DOF ids
    tol: float
    removed_energy: float  # cumulative sum of removed squared energy norms


def solve_spd(A, b):
    """Solve the symmetric positive definite system A x = b directly.

    Sparse LU in symmetric mode (no off-diagonal pivoting), so the pivot
    signs carry the inertia: a nonpositive pivot is reported as a
    ``FactorizationError``, distinct from the ``ValueError`` raised on
    dimension mismatch.  The relative residual is verified to be below 1e-10.
    """
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {b.shape[0]} entries")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(
            sp.csc_matrix(A),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise FactorizationError(f"factorization breakdown: {exc}") from exc
    pivots = lu.U.diagonal()
    if np.any(pivots <= 0.0):
        raise FactorizationError(
            f"non-positive-definite pivot (min pivot {pivots.min():.6g})"
        )
    x = lu.solve(b)
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        res = np.linalg.norm(A @ x - b) / bnorm
        if not res < 1e-10:
            raise FactorizationError(f"direct solve residual too large: {res:.3e}")
    return x


def basis_removal(energy_norms, c, h, p):
    """Select DOFs for removal by the ascending-energy prefix rule.

    DOFs are sorted by energy norm (ties by DOF id) and the longest prefix
    with cumulative squared energy <= tol^2, tol = c*h^p, is removed.
    """
    if c < 0:
        raise ValueError("removal constant must be nonnegative")
    norms = np.asarray(energy_norms, dtype=float)
    tol = c * h**p
    tol2 = tol * tol
    order = np.lexsort((np.arange(norms.size), norms))
    removed = []
    cum = 0.0
    for dof in order:
        nxt = cum + norms[dof] ** 2
        if nxt > tol2:
            break
        cum = nxt
        removed.append(int(dof))
    removed = np.array(sorted(removed), dtype=int)
    keep_mask = np.ones(norms.size, dtype=bool)
    keep_mask[removed] = False
    return RemovalReport(
        kept=np.nonzero(keep_mask)[0],
        removed=removed,
        tol=tol,
        removed_energy=cum,
    )


def restrict_system(sys, report):
    """Principal subsystem on the kept DOFs."""
    kept = report.kept
    if kept.size == 0:
        raise ValueError("removal would empty the system")
    A = sp.csr_matrix(sys.A)[kept][:, kept].tocsr()
    return SystemMatrices(A, sys.b[kept], sys.space)


def embed_solution(x_restricted, report, n):
    """Re-embed a reduced solution with zeros at the removed DOFs."""
    x = np.zeros(n)
    x[report.kept] = x_restricted
    return x


def sym_eigen_extremes(A, dense_threshold=DENSE_EIGEN_THRESHOLD):
    """Smallest and largest eigenvalue of a symmetric matrix.

    Dense LAPACK eigensolve (tridiagonalization + QR) up to the threshold,
    Lanczos (ARPACK) above it with relative tolerance 1e-8.  Non-convergence
    raises ``EigenConvergenceError`` carrying the best available estimates.
    """
    n = A.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if n <= dense_threshold:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        w = sla.eigvalsh(dense)
        return float(w[0]), float(w[-1])
    A = sp.csr_matrix(A)
    est = {}
    try:
        hi = spla.eigsh(A, k=1, which="LA", tol=1e-8, return_eigenvectors=False)
        est["lam_max"] = float(hi[0])
        lo = spla.eigsh(A, k=1, which="SA", tol=1e-8, return_eigenvectors=False,
                        maxiter=50 * n)
        est["lam_min"] = float(lo[0])
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            est.setdefault("lam_min", float(np.min(exc.eigenvalues)))
            est.setdefault("lam_max", float(np.max(exc.eigenvalues)))
        raise EigenConvergenceError(
            f"Lanczos did not converge: {exc}",
            lam_min=est.get("lam_min"),
            lam_max=est.get("lam_max"),
        ) from exc
    return est["lam_min"], est["lam_max"]


def condition_number(A, dense_threshold=DENSE_EIGEN_THRESHOLD):
    """Spectral condition number lambda_max / lambda_min.

    Raises ``NotPositiveDefiniteError`` (with lambda_min attached) when the
    smallest eigenvalue is nonpositive; the coercivity studies catch this and
    record lambda_min.
    """
    lam_min, lam_max = sym_eigen_extremes(A, dense_threshold)
    if lam_min <= 0:
        raise NotPositiveDefiniteError(lam_min, lam_max)
    return lam_max / lam_min
