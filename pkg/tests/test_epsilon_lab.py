"""Empirical checks of the small-amplitude expansion machinery."""

import numpy as np
import pytest

from schroinv import benchmarks
from schroinv.epsilon_lab import (
    check_remainder_admissibility,
    contraction_study,
    expansion_residual_study,
)
from schroinv.grid import BoundaryTrace, SpaceTimeGrid
from schroinv.solver import SOLVER_TOL, NonlinearitySpec


def standing_mode(g):
    xs = g.space_mesh()
    phi = np.ones(g.m, dtype=complex)
    for x, box in zip(xs, g.box):
        phi = phi * np.sin(np.pi * x / box)
    return phi, BoundaryTrace.zeros(g)


def setup_case(m=17, nt=32):
    g = SpaceTimeGrid((m, m), nt)
    q = benchmarks.q_bench(g)
    nl = NonlinearitySpec(b=benchmarks.b_bench(g),
                          remainder_kind="cubic_flat")
    phi, f = standing_mode(g)
    return g, q, nl, phi, f


def test_trivial_nonlinearity_expansion_is_exact():
    g, q, _, phi, f = setup_case(9, 8)
    report = expansion_residual_study(q, NonlinearitySpec(), phi, f,
                                      [0.2, 0.1])
    assert all(r <= 10.0 * SOLVER_TOL for r in report["residual"])
    assert report["slope"] is None   # everything below the fit floor


def test_cubic_slope_with_quadratic_term():
    g, q, nl, phi, f = setup_case()
    report = expansion_residual_study(q, nl, phi, f,
                                      [0.2, 0.1, 0.05, 0.025])
    assert 2.7 <= report["slope"] <= 3.3
    assert not report["failed_eps"]
    # residual/eps^3 bounded above and below within a factor 10
    ratios = [r / e**3 for e, r in zip(report["eps"], report["residual"])]
    assert max(ratios) <= 10.0 * min(ratios)


def test_quadratic_only_slope_unchanged():
    g, q, nl, phi, f = setup_case()
    report = expansion_residual_study(q, NonlinearitySpec(b=nl.b), phi, f,
                                      [0.2, 0.1, 0.05, 0.025])
    assert 2.7 <= report["slope"] <= 3.3


def test_diverging_eps_reported_not_raised():
    g, q, nl, phi, f = setup_case(9, 8)
    big = NonlinearitySpec(b=type(nl.b)(g, 200.0 * np.asarray(nl.b.data)))
    report = expansion_residual_study(q, big, phi, f, [8.0, 1e-3])
    assert 8.0 in report["failed_eps"]
    assert report["eps"] == [1e-3]


def test_contraction_trivial_converges_immediately():
    g, q, _, phi, f = setup_case(9, 8)
    report = contraction_study(q, NonlinearitySpec(), phi, f, 0.1)
    assert report["converged"]
    assert report["iterations"] == 1
    assert report["rho"] == 0.0


def test_contraction_rho_halves_with_eps():
    g, q, nl, phi, f = setup_case()
    rhos = [contraction_study(q, nl, phi, f, e)["rho"]
            for e in (0.2, 0.1, 0.05)]
    for a, b in zip(rhos, rhos[1:]):
        assert abs(b / a - 0.5) < 0.3 * 0.5
    assert all(r < 1.0 for r in rhos)


def test_contraction_divergence_reported():
    g, q, nl, phi, f = setup_case(9, 8)
    big = NonlinearitySpec(b=type(nl.b)(g, 200.0 * np.asarray(nl.b.data)))
    report = contraction_study(q, big, phi, f, 8.0)
    assert not report["converged"]
    assert report["rho"] >= 1.0


def test_u1_u2_scaling_with_inputs():
    # doubling (phi, f) doubles u1 and quadruples u2
    from schroinv.solver import compute_u2, solve_linear

    g, q, nl, phi, f = setup_case(9, 8)
    u1 = solve_linear(q, phi, f)
    u1d = solve_linear(q, 2.0 * phi, f * 2.0 if hasattr(f, "__mul__") else f)
    assert np.allclose(u1d.data, 2.0 * u1.data, atol=1e-12)
    u2 = compute_u2(q, nl.b, u1)
    u2d = compute_u2(q, nl.b, u1d)
    assert np.allclose(u2d.data, 4.0 * u2.data, atol=1e-10)


def test_remainder_zero_is_admissible():
    report = check_remainder_admissibility(lambda t, xi: np.zeros_like(xi))
    assert report["admissible"]


def test_remainder_cubic_flat_admissible():
    nl = NonlinearitySpec(remainder_kind="cubic_flat", remainder_scale=1.0)
    report = check_remainder_admissibility(nl)
    assert report["admissible"]
    assert report["C"] > 0.0


def test_remainder_quadratic_rejected():
    # R(xi) = |xi| xi is only quadratic: the |xi|^3 bound fails at xi -> 0
    report = check_remainder_admissibility(
        lambda t, xi: np.linalg.norm(xi) * np.asarray(xi, dtype=complex))
    assert not report["cubic_ok"]
    assert not report["admissible"]
