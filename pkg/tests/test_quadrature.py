import math

import numpy as np
import pytest

from cutiga.quadrature import (
    cut_cell_rule,
    gauss_segment,
    tensor_rule_full_element,
    triangle_rule,
)
from oracles import subdivision_integral


def test_segment_constant_gives_length():
    r = gauss_segment((0.0, 0.0), (3.0, 4.0), 4)
    assert r.weights.sum() == pytest.approx(5.0, rel=1e-14)


def test_segment_quintic_exact_with_three_points():
    r = gauss_segment((0.0, 0.0), (1.0, 0.0), 3)
    assert r.integrate(lambda p: p[:, 0] ** 5) == pytest.approx(1.0 / 6.0, abs=1e-14)


def test_segment_exactness_bound_is_sharp():
    # 2-point Gauss on s^4: value is 7/36, not the exact 1/5
    r = gauss_segment((0.0, 0.0), (1.0, 0.0), 2)
    val = r.integrate(lambda p: p[:, 0] ** 4)
    assert val == pytest.approx(7.0 / 36.0, abs=1e-15)
    assert abs(val - 0.2) > 1e-3


def test_segment_normal_and_tangent():
    r = gauss_segment((0.0, 0.0), (0.0, 2.0), 2)
    assert np.allclose(r.tangents, [0.0, 1.0])
    assert np.allclose(r.normals, [1.0, 0.0])  # rightward of upward CCW travel


def test_zero_length_segment_empty():
    assert len(gauss_segment((1.0, 1.0), (1.0, 1.0), 3)) == 0


def test_tensor_rule_constant_and_exactness():
    r = tensor_rule_full_element((0.3, 0.7, 0.25), 4)
    assert r.weights.sum() == pytest.approx(0.0625, rel=1e-14)
    r01 = tensor_rule_full_element((0.0, 0.0, 1.0), 4)
    assert r01.integrate(lambda p: p[:, 0] ** 3 * p[:, 1] ** 3) == pytest.approx(
        1.0 / 16.0, abs=1e-14
    )


def test_tensor_rule_matches_refined_rule_on_stiffness_integrand():
    # piecewise bi-quadratic gradients: per-axis degree <= 4
    rng = np.random.default_rng(11)
    coef = rng.standard_normal((5, 5))

    def integrand(p):
        out = np.zeros(p.shape[0])
        for a in range(5):
            for b in range(5):
                out += coef[a, b] * p[:, 0] ** a * p[:, 1] ** b
        return out

    box = (0.1, 0.2, 0.5)
    v4 = tensor_rule_full_element(box, 4).integrate(integrand)
    v10 = tensor_rule_full_element(box, 10).integrate(integrand)
    assert v4 == pytest.approx(v10, abs=1e-13 * max(1.0, abs(v10)))


def test_triangle_rule_positive_weights_and_degree():
    for npts in (2, 3, 4, 5):
        r = triangle_rule((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), npts)
        assert (r.weights > 0).all()
        deg = 2 * npts - 1
        # check all monomials up to the declared degree
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                exact = (
                    math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
                )
                got = r.integrate(lambda p: p[:, 0] ** a * p[:, 1] ** b)
                assert got == pytest.approx(exact, rel=1e-12, abs=1e-15), (npts, a, b)


def test_triangle_rule_affine_invariance():
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = rng.uniform(-1, 1, (3, 2))
        area = 0.5 * abs(
            (v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1])
            - (v[2, 0] - v[0, 0]) * (v[1, 1] - v[0, 1])
        )
        r = triangle_rule(v[0], v[1], v[2], 4)
        assert r.weights.sum() == pytest.approx(area, rel=1e-12)
        assert (r.weights > 0).all()


def test_cut_cell_rule_full_element():
    h = 0.3
    square = [(0.0, 0.0), (h, 0.0), (h, h), (0.0, h)]
    r = cut_cell_rule(square, 4)
    assert r.weights.sum() == pytest.approx(h * h, rel=1e-13)
    assert (r.weights > 0).all()


def test_cut_cell_rule_right_triangle():
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    r = cut_cell_rule(tri, 4)
    assert r.integrate(lambda p: p[:, 0]) == pytest.approx(1.0 / 6.0, abs=1e-14)


def test_cut_cell_rule_pentagon_vs_subdivision_oracle():
    pent = [(0.0, 0.0), (1.0, 0.1), (1.2, 0.8), (0.5, 1.1), (-0.1, 0.7)]
    r = cut_cell_rule(pent, 4)
    got = r.integrate(lambda p: p[:, 0] ** 2 * p[:, 1] ** 2)
    want = subdivision_integral(lambda x, y: x**2 * y**2, pent, tol=1e-12)
    assert got == pytest.approx(want, abs=1e-10)


def test_cut_cell_rule_degenerate_polygon_empty():
    assert len(cut_cell_rule([(0.0, 0.0), (1.0, 0.0)], 4)) == 0
    sliver = [(0.0, 0.0), (1.0, 0.0), (0.5, 1e-16)]
    assert len(cut_cell_rule(sliver, 4)) == 0


def test_additivity_over_triangulations():
    # rule over a polygon equals the sum of rules over a triangulation of it,
    # measured on random degree-4 polynomials
    rng = np.random.default_rng(19)
    quad = [(0.0, 0.0), (1.0, 0.0), (1.3, 0.9), (0.2, 1.0)]
    tris = [
        [(0.0, 0.0), (1.0, 0.0), (1.3, 0.9)],
        [(0.0, 0.0), (1.3, 0.9), (0.2, 1.0)],
    ]
    for _ in range(20):
        coef = rng.standard_normal((5, 5))

        def f(p):
            out = np.zeros(p.shape[0])
            for a in range(5):
                for b in range(5 - a):
                    out += coef[a, b] * p[:, 0] ** a * p[:, 1] ** b
            return out

        whole = cut_cell_rule(quad, 4).integrate(f)
        parts = sum(cut_cell_rule(t, 4).integrate(f) for t in tris)
        assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


def test_randomized_affine_exactness():
    rng = np.random.default_rng(23)
    for _ in range(10):
        a = rng.uniform(-2, 2, 2)
        b = a + rng.uniform(0.1, 2, 2) * rng.choice([-1.0, 1.0], 2)
        r = gauss_segment(a, b, 5)
        L = np.hypot(*(b - a))
        for k in range(10):
            # parametric monomial s^k along the segment, degree <= 2*5-1
            want = L / (k + 1)
            ts = ((r.points - a) @ (b - a)) / (L * L)
            got = float(r.weights @ ts**k)
            assert got == pytest.approx(want, rel=1e-12)
