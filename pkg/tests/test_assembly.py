import numpy as np
import pytest

from cutiga.assembly import (
    FormBlocks,
    MethodParams,
    ProblemData,
    assemble,
    assemble_standard,
    basis_energy_norms,
    energy_gram,
    error_norms,
    evaluate_solution,
    evaluate_solution_many,
    export_matrix_text,
    export_vector_text,
)
from cutiga.geometry import make_unit_circle_domain, make_unit_square_domain
from cutiga.linalg import solve_spd, sym_eigen_extremes
from cutiga.splines import TensorSplineSpace


def linear_data():
    return ProblemData(
        f=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        g=lambda x, y: x + 2.0 * y,
        grad_g=lambda x, y: (
            np.ones_like(np.asarray(x, dtype=float)),
            np.full_like(np.asarray(x, dtype=float), 2.0),
        ),
    )


U = lambda x, y: x + 2.0 * y
GRAD_U = lambda x, y: (
    np.ones_like(np.asarray(x, dtype=float)),
    np.full_like(np.asarray(x, dtype=float), 2.0),
)
LAP_U = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))


@pytest.fixture(scope="module")
def fitted():
    dom = make_unit_square_domain(8, 0.0)
    space = TensorSplineSpace.for_domain(dom, 2)
    return dom, space


@pytest.fixture(scope="module")
def fitted_blocks(fitted):
    dom, space = fitted
    return FormBlocks(space, dom, linear_data())


def test_params_validation():
    with pytest.raises(ValueError):
        MethodParams(p=1)
    with pytest.raises(ValueError):
        MethodParams(tau=0.0)
    with pytest.raises(ValueError):
        MethodParams(beta=-1.0)
    with pytest.raises(ValueError):
        MethodParams(variant="nitsche")


def test_mismatched_grid_rejected(fitted):
    dom, _ = fitted
    other = make_unit_square_domain(9, 0.0)
    space9 = TensorSplineSpace.for_domain(other, 2)
    with pytest.raises(ValueError):
        assemble(space9, dom, MethodParams(), linear_data())


@pytest.mark.parametrize("variant", ["ls", "standard"])
def test_exact_symmetry(fitted_blocks, variant):
    A = fitted_blocks.combine(MethodParams(variant=variant)).A
    d = A - A.T
    assert d.nnz == 0


def test_symmetry_on_cut_circle():
    dom = make_unit_circle_domain(0.26, 0.63)
    space = TensorSplineSpace.for_domain(dom, 2)
    A = assemble(space, dom, MethodParams(), linear_data()).A
    assert (A - A.T).nnz == 0


@pytest.mark.parametrize("variant", ["ls", "standard"])
def test_patch_test_linear(fitted, variant):
    dom, space = fitted
    params = MethodParams(variant=variant)
    sysm = assemble(space, dom, params, linear_data())
    x = solve_spd(sysm.A, sysm.b)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 1.0, (400, 2))
    v, g = evaluate_solution_many(space, x, pts)
    assert np.abs(v - (pts[:, 0] + 2 * pts[:, 1])).max() < 1e-10
    assert np.abs(g - [1.0, 2.0]).max() < 1e-9


def test_beta_scaling_is_penalty_block(fitted, fitted_blocks):
    dom, space = fitted
    A10 = fitted_blocks.combine(MethodParams(beta=10.0)).A
    A20 = fitted_blocks.combine(MethodParams(beta=20.0)).A
    tau, delta = 0.1, dom.h
    pen = ((2.0 + 1.0 / tau) / delta) * fitted_blocks.pen0 + (2.0 * delta) * fitted_blocks.pen1
    diff = (A20 - A10) - 10.0 * pen
    scale = max(abs(A10).max(), 1.0)
    assert abs(diff).max() < 1e-12 * scale


def test_standard_equals_ls_with_terms_zeroed(fitted, fitted_blocks):
    dom, space = fitted
    params = MethodParams()
    pen_scale = params.beta * (2.0 + 1.0 / params.tau) / dom.h
    manual = fitted_blocks.vol + fitted_blocks.cons + pen_scale * fitted_blocks.pen0
    Astd = assemble_standard(space, dom, params, linear_data()).A
    assert abs(manual - Astd).max() == 0.0


def test_beta_monotone_quadratic_form(fitted_blocks):
    A5 = fitted_blocks.combine(MethodParams(beta=5.0)).A
    A9 = fitted_blocks.combine(MethodParams(beta=9.0)).A
    rng = np.random.default_rng(4)
    for _ in range(10):
        v = rng.standard_normal(A5.shape[0])
        assert v @ (A9 @ v) >= v @ (A5 @ v) - 1e-12 * abs(v @ (A9 @ v))


def test_sparsity_interior_rows(fitted):
    dom, space = fitted
    A = assemble(space, dom, MethodParams(), linear_data()).A
    nnz_per_row = np.diff(A.indptr)
    assert nnz_per_row.max() <= 25  # (2p+1)^2 for p=2
    # disjoint supports never couple
    i = space.dof_of((3, 3))
    j = space.dof_of((7, 7))
    assert A[i, j] == 0.0


def test_galerkin_residual(fitted):
    dom, space = fitted
    params = MethodParams()
    sysm = assemble(space, dom, params, linear_data())
    x = solve_spd(sysm.A, sysm.b)
    r = sysm.A @ x - sysm.b
    assert np.abs(r).max() < 1e-10 * np.linalg.norm(sysm.b)


def test_evaluate_solution_basics(fitted):
    dom, space = fitted
    zero = np.zeros(space.n_dofs)
    v, g = evaluate_solution(space, zero, (0.4, 0.5))
    assert v == 0.0 and not g.any()
    # one unit coefficient reproduces the basis function
    k = space.dof_of((3, 4))
    e = zero.copy()
    e[k] = 1.0
    rng = np.random.default_rng(2)
    for _ in range(10):
        pt = rng.uniform(0.05, 0.95, 2)
        v, g = evaluate_solution(space, e, pt)
        bv, bg, _, _ = space.eval_basis_2d((3, 4), pt)
        assert v == pytest.approx(bv, abs=1e-14)
        assert np.allclose(g, bg, atol=1e-12)


def test_error_norms_patch_and_analytic(fitted):
    dom, space = fitted
    params = MethodParams()
    sysm = assemble(space, dom, params, linear_data())
    x = solve_spd(sysm.A, sysm.b)
    l2, h1, en = error_norms(space, x, U, GRAD_U, LAP_U, dom, params)
    assert l2 < 1e-9 and h1 < 1e-9 and en < 1e-9
    # against u = 0 the "error" is the norm of x + 2y itself:
    # ||u||_L2^2 = 8/3, |u|_H1^2 = 5 on the unit square
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    gz = lambda x, y: (zero(x, y), zero(x, y))
    l2n, h1n, enn = error_norms(space, x, zero, gz, zero, dom, params)
    assert l2n == pytest.approx(np.sqrt(8.0 / 3.0), abs=1e-9)
    assert h1n == pytest.approx(np.sqrt(5.0), abs=1e-9)
    assert enn >= h1n


def test_energy_dominates_h1_on_manufactured_solve():
    dom = make_unit_square_domain(8, 0.4)
    space = TensorSplineSpace.for_domain(dom, 2)
    params = MethodParams()

    def u(x, y):
        return 0.1 * (np.sin(2 * x) + x * np.cos(3 * y))

    def gu(x, y):
        return (0.1 * (2 * np.cos(2 * x) + np.cos(3 * y)), 0.1 * (-3 * x * np.sin(3 * y)))

    def lu(x, y):
        return 0.1 * (-4 * np.sin(2 * x) - 9 * x * np.cos(3 * y))

    data = ProblemData(f=lambda x, y: -lu(x, y), g=u, grad_g=gu)
    sysm = assemble(space, dom, params, data)
    x = solve_spd(sysm.A, sysm.b)
    l2, h1, en = error_norms(space, x, u, gu, lu, dom, params)
    assert en >= h1 > 0


def test_ls_psd_across_cut_situations():
    for t in (0.0, 0.31, 0.77):
        dom = make_unit_circle_domain(0.26, t)
        space = TensorSplineSpace.for_domain(dom, 2)
        for beta in (5.0, 10.0):
            A = assemble(space, dom, MethodParams(beta=beta), linear_data()).A
            lam_min, lam_max = sym_eigen_extremes(A)
            assert lam_min >= -1e-10 * lam_max


def test_standard_can_lose_coercivity_on_sliver_cut():
    # extreme sliver cut: the standard form carries no coercivity guarantee,
    # so the smallest eigenvalue may go negative; the LS form must not
    found_negative = False
    for t in [k / 40 for k in range(40)]:
        dom = make_unit_circle_domain(0.26, t)
        space = TensorSplineSpace.for_domain(dom, 2)
        blocks = FormBlocks(space, dom, data=None)
        lam_std = sym_eigen_extremes(blocks.combine(MethodParams(variant="standard", tau=1.0)).A)[0]
        lam_ls, lam_max = sym_eigen_extremes(blocks.combine(MethodParams(tau=1.0)).A)
        assert lam_ls >= -1e-10 * lam_max
        if lam_std < -1e-10 * lam_max:
            found_negative = True
    assert found_negative


def test_basis_energy_norms_translation_invariance(fitted):
    dom, space = fitted
    params = MethodParams()
    norms = basis_energy_norms(space, dom, params)
    # full-interior bases (support and band-free neighborhood inside) agree
    interior = [
        space.dof_of((i, j)) for i in range(2, 4) for j in range(2, 4)
    ]
    vals = norms[interior]
    assert np.abs(vals - vals[0]).max() < 1e-12 * vals[0]


def test_basis_energy_norm_is_gram_diagonal(fitted):
    dom, space = fitted
    params = MethodParams()
    M = energy_gram(space, dom, params)
    norms = basis_energy_norms(space, dom, params)
    k = space.dof_of((4, 5))
    e = np.zeros(space.n_dofs)
    e[k] = 1.0
    assert norms[k] ** 2 == pytest.approx(e @ (M @ e), rel=1e-14)


def test_sliver_basis_norm_decreases():
    params = MethodParams()
    prev = np.inf
    for delta_cut in (0.5, 0.9, 0.99, 0.999):
        dom = make_unit_square_domain(8, delta_cut)
        space = TensorSplineSpace.for_domain(dom, 2)
        norms = basis_energy_norms(space, dom, params)
        corner = space.dof_of((7, 7))  # support only in the sliver corner
        assert norms[corner] < prev
        prev = norms[corner]
    assert prev < 1e-3


def test_export_text_roundtrip(fitted):
    dom, space = fitted
    sysm = assemble(space, dom, MethodParams(), linear_data())
    text = export_matrix_text(sysm.A)
    line = text.splitlines()[0].split()
    assert len(line) == 3
    i, j, v = int(line[0]), int(line[1]), float(line[2])
    assert sysm.A[i, j] == v  # 17 significant digits round-trip
    vec = export_vector_text(sysm.b)
    assert float(vec.splitlines()[5]) == sysm.b[5]
