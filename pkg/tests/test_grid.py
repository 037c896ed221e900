"""Grid, stencil and quadrature unit tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schroinv.grid import (
    BoundaryTrace,
    ComplexField,
    SpaceTimeGrid,
    _face_index,
    boundary_mask,
    gradient_all,
    gradient_slice,
    inner_spacetime,
    laplacian_slice,
    normal_derivative,
    norm_l2_space,
    quadrature_lateral,
    quadrature_space,
    quadrature_spacetime,
    sup_t_l2,
)


def make_grid(m=17, nt=8):
    return SpaceTimeGrid((m, m), nt)


def test_grid_basic_properties():
    g = SpaceTimeGrid((17, 33), 10, box=(1.0, 2.0), T=0.5)
    assert g.n == 2
    assert g.h == (1.0 / 16, 2.0 / 32)
    assert g.dt == 0.05
    assert g.shape == (11, 17, 33)
    assert len(g.faces()) == 4
    assert g.face_shape((0, 1)) == (33,)


def test_grid_validation():
    with pytest.raises(ValueError):
        SpaceTimeGrid((4, 17), 8)
    with pytest.raises(ValueError):
        SpaceTimeGrid((17, 17), 1)
    with pytest.raises(ValueError):
        SpaceTimeGrid((17, 17), 8, box=(1.0,))
    with pytest.raises(ValueError):
        SpaceTimeGrid((17, 17), 8, T=-1.0)


def test_boundary_mask_counts():
    g = make_grid(m=9)
    mask = boundary_mask(g)
    assert mask.sum() == 9 * 9 - 7 * 7
    assert not mask[4, 4] and mask[0, 3] and mask[3, -1]


def test_field_from_function_broadcasts():
    g = make_grid()
    fld = ComplexField.from_function(g, lambda t, x, y: t + 2 * x + 3j * y)
    t = g.times()
    x = g.axis_coords(0)
    y = g.axis_coords(1)
    assert np.isclose(fld.data[3, 5, 7], t[3] + 2 * x[5] + 3j * y[7])


def test_gradient_exact_on_linear():
    g = make_grid()
    fld = ComplexField.from_function(g, lambda t, x, y: 2.0 * x - 3.0 * y + 0j)
    grad = gradient_slice(fld, 4)
    assert np.allclose(grad[0], 2.0, atol=1e-13)
    assert np.allclose(grad[1], -3.0, atol=1e-13)
    with pytest.raises(IndexError):
        gradient_slice(fld, g.nt + 1)


def test_gradient_second_order_on_oscillatory():
    # grad e^{i k x} error should fall by ~4x per mesh halving
    k = 3.0
    errs = []
    for m in (17, 33, 65):
        g = SpaceTimeGrid((m, m), 2)
        fld = ComplexField.from_function(g, lambda t, x, y: np.exp(1j * k * x))
        grad = gradient_slice(fld, 0)
        exact = 1j * k * fld.data[0]
        errs.append(np.max(np.abs(grad[0] - exact)))
    assert 3.0 < errs[0] / errs[1] < 5.0
    assert 3.0 < errs[1] / errs[2] < 5.0


def test_gradient_all_matches_slices():
    g = make_grid()
    rng = np.random.default_rng(7)
    fld = ComplexField(g, rng.standard_normal(g.shape)
                       + 1j * rng.standard_normal(g.shape))
    full = gradient_all(fld)
    for k in (0, 3, g.nt):
        assert np.allclose(full.data[:, k], gradient_slice(fld, k))


def test_laplacian_eigenfunction():
    # sin(pi x) sin(pi y) is a discrete near-eigenfunction, eigenvalue -2 pi^2
    errs = []
    for m in (17, 33, 65):
        g = SpaceTimeGrid((m, m), 2)
        fld = ComplexField.from_function(
            g, lambda t, x, y: np.sin(np.pi * x) * np.sin(np.pi * y) + 0j)
        lap = laplacian_slice(fld, 0)
        core = g.interior_slices()
        err = np.max(np.abs(lap[core] + 2 * np.pi**2 * fld.data[0][core]))
        errs.append(err)
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_laplacian_symmetric_on_interior():
    # discrete Green identity: <Lap u, v> = <u, Lap v> for compactly
    # supported slices (trapezoid weights are uniform on the support)
    g = make_grid(m=21, nt=2)
    rng = np.random.default_rng(3)
    u = np.zeros(g.m, dtype=complex)
    v = np.zeros(g.m, dtype=complex)
    u[3:-3, 3:-3] = rng.standard_normal((15, 15)) + 1j * rng.standard_normal((15, 15))
    v[3:-3, 3:-3] = rng.standard_normal((15, 15)) + 1j * rng.standard_normal((15, 15))
    fu = ComplexField(g, np.broadcast_to(u, g.shape).copy())
    fv = ComplexField(g, np.broadcast_to(v, g.shape).copy())
    lhs = quadrature_space(laplacian_slice(fu, 0) * np.conj(v), g)
    rhs = quadrature_space(u * np.conj(laplacian_slice(fv, 0)), g)
    scale = max(abs(lhs), abs(rhs), 1.0)
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_normal_derivative_exact_on_quadratic():
    g = make_grid()
    fld = ComplexField.from_function(g, lambda t, x, y: x**2 + 0j)
    nd = normal_derivative(fld)
    assert np.allclose(nd.faces[(0, 1)], 2.0, atol=1e-11)   # outward at x=1
    assert np.allclose(nd.faces[(0, 0)], 0.0, atol=1e-11)   # -d/dx at x=0
    assert np.allclose(nd.faces[(1, 0)], 0.0, atol=1e-11)
    assert np.allclose(nd.faces[(1, 1)], 0.0, atol=1e-11)


def test_normal_derivative_second_order():
    errs = []
    for m in (17, 33, 65):
        g = SpaceTimeGrid((m, m), 2)
        fld = ComplexField.from_function(g, lambda t, x, y: np.exp(2.0 * x) + 0j)
        nd = normal_derivative(fld)
        errs.append(np.max(np.abs(nd.faces[(0, 1)] - 2.0 * np.exp(2.0))))
    assert 3.3 < errs[0] / errs[1] < 4.7
    assert 3.3 < errs[1] / errs[2] < 4.7


def test_quadrature_exact_on_multilinear():
    g = SpaceTimeGrid((17, 9), 6, box=(2.0, 3.0), T=1.5)
    fld = ComplexField.from_function(g, lambda t, x, y: (t + 1) * (x + 1) * (y + 2j))
    # int over (0,1.5)x(0,2)x(0,3) of (t+1)(x+1)(y+2i)
    exact = (1.5 + 1.5**2 / 2) * (2.0**2 / 2 + 2.0) * (3.0**2 / 2 + 2j * 3.0)
    assert abs(quadrature_spacetime(fld) - exact) < 1e-12 * abs(exact)


def test_quadrature_periodic_mode_vanishes():
    # trapezoid over full periods annihilates e^{2 pi i x} to round-off
    g = make_grid(m=33)
    fld = ComplexField.from_function(g, lambda t, x, y: np.exp(2j * np.pi * x))
    assert abs(quadrature_spacetime(fld)) < 1e-13


def test_quadrature_second_order():
    exact = (np.exp(1.0) - 1.0) ** 2  # int e^{x+y} over unit square
    errs = []
    for m in (9, 17, 33):
        g = SpaceTimeGrid((m, m), 2)
        fld = ComplexField.from_function(g, lambda t, x, y: np.exp(x + y) + 0j)
        errs.append(abs(quadrature_space(fld.data[0], g) - exact))
    assert 3.6 < errs[0] / errs[1] < 4.4
    assert 3.6 < errs[1] / errs[2] < 4.4


def test_lateral_quadrature_constant():
    # int of 1 over (0,T) x dOmega = T * perimeter
    g = SpaceTimeGrid((17, 17), 8, box=(1.0, 2.0), T=0.5)
    tr = BoundaryTrace.from_function(g, lambda t, x, y: 1.0 + 0j)
    assert abs(quadrature_lateral(tr) - 0.5 * 6.0) < 1e-12


def test_lateral_quadrature_separable():
    # f = t * y on the two x-faces only
    g = make_grid()
    tr = BoundaryTrace.zeros(g)
    t = g.times()[:, np.newaxis]
    y = g.axis_coords(1)[np.newaxis, :]
    tr.faces[(0, 0)] = (t * y).astype(complex)
    exact = 0.5 * 0.5  # int_0^1 t dt * int_0^1 y dy
    assert abs(quadrature_lateral(tr) - exact) < 1e-12


def test_trace_roundtrip_and_apply():
    g = make_grid()
    fld = ComplexField.from_function(g, lambda t, x, y: np.cos(x) + 1j * t * y)
    tr = BoundaryTrace.from_field(fld)
    assert tr.final is not None
    sl = np.zeros(g.m, dtype=complex)
    tr.apply_to_slice(sl, 3)
    for face in g.faces():
        assert np.allclose(sl[_face_index(g, face)], fld.data[(3,) + _face_index(g, face)])
    assert np.all(~boundary_mask(g) | (sl != 0) | (np.abs(fld.data[3]) < 1e-300))


def test_trace_arithmetic():
    g = make_grid()
    a = BoundaryTrace.from_function(g, lambda t, x, y: x + 0j)
    b = BoundaryTrace.from_function(g, lambda t, x, y: 1j * y)
    c = 2.0 * a + b - a
    assert np.allclose(c.faces[(1, 0)], a.faces[(1, 0)] + b.faces[(1, 0)])


def test_norms():
    g = make_grid(m=33)
    fld = ComplexField.from_function(g, lambda t, x, y: (1.0 + t) + 0 * x)
    assert abs(norm_l2_space(fld.data[0], g) - 1.0) < 1e-12
    assert abs(sup_t_l2(fld) - 2.0) < 1e-12
    assert abs(inner_spacetime(fld, fld).imag) < 1e-12


coef = st.complex_numbers(min_magnitude=0, max_magnitude=10,
                          allow_nan=False, allow_infinity=False)


@settings(max_examples=25, deadline=None)
@given(a=coef, b=coef, seed=st.integers(0, 2**16))
def test_stencils_linear(a, b, seed):
    g = SpaceTimeGrid((9, 9), 2)
    rng = np.random.default_rng(seed)
    u = ComplexField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    v = ComplexField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    comb = ComplexField(g, a * u.data + b * v.data)
    scale = max(1.0, abs(a), abs(b)) * 1e3
    assert np.allclose(gradient_slice(comb, 1),
                       a * gradient_slice(u, 1) + b * gradient_slice(v, 1),
                       atol=1e-10 * scale)
    assert np.allclose(laplacian_slice(comb, 1),
                       a * laplacian_slice(u, 1) + b * laplacian_slice(v, 1),
                       atol=1e-9 * scale)


@settings(max_examples=25, deadline=None)
@given(a=coef, seed=st.integers(0, 2**16))
def test_quadrature_linear_and_conjugate(a, seed):
    g = SpaceTimeGrid((9, 9), 3)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    q1 = quadrature_spacetime(a * u, g)
    q2 = a * quadrature_spacetime(u, g)
    assert abs(q1 - q2) < 1e-10 * max(1.0, abs(q2))
    assert abs(quadrature_spacetime(np.conj(u), g)
               - np.conj(quadrature_spacetime(u, g))) < 1e-12
