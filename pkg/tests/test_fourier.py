"""Windowed Fourier sample sets, inversion paths and analytic oracles."""

import numpy as np
import pytest

from schroinv import benchmarks
from schroinv.fourier import (
    FourierSampleSet,
    invert_samples,
    invert_samples_complex,
)
from schroinv.grid import ComplexField, SpaceTimeGrid, quadrature_spacetime
from schroinv.oracles import analytic_fourier


def windowed_transform(grid, values, tau, xi):
    """Brute-force trapezoidal transform int f e^{+i(tau t + xi.x)}."""
    t, *xs = grid.spacetime_mesh()
    phase = tau * t
    for x, comp in zip(xs, xi):
        phase = phase + comp * x
    return quadrature_spacetime(values * np.exp(1j * phase), grid)


def test_band_indices_and_conjugate_fill():
    g = SpaceTimeGrid((9, 9), 8)
    s = FourierSampleSet(g, 2, 2)
    full = s.band_indices()
    half = s.band_indices(half=True)
    assert len(full) == 5 * 5 * 5
    assert 2 * len(half) - 1 == len(full)   # the origin is self-paired
    for idx in half:
        s.set_sample(idx[0], idx[1:], 1.0 + 1.0j)
    assert not s.band_complete()
    s.fill_conjugates()
    assert s.band_complete()
    # conjugate symmetry: F(-j, -k) = conj F(j, k)
    assert s.get_sample(-2, (1, -2)) == np.conj(s.get_sample(2, (-1, 2)))


def test_inversion_recovers_single_cosine():
    g = SpaceTimeGrid((17, 17), 16)
    t, x, y = g.spacetime_mesh()
    field = 1.5 + np.cos(2 * np.pi * (t + x - 2 * y))
    s = FourierSampleSet(g, 2, 2)
    for idx in s.band_indices():
        j, kvec = idx[0], idx[1:]
        val = windowed_transform(g, field, s.tau_of(j), s.xi_of(kvec))
        s.set_sample(j, kvec, val)
    values, imag_ratio = invert_samples(s)
    assert imag_ratio < 1e-10
    assert np.max(np.abs(values - field)) < 1e-10


def test_complex_inversion_no_symmetry_assumed():
    g = SpaceTimeGrid((17, 17), 16)
    t, x, y = g.spacetime_mesh()
    field = np.exp(1j * 2 * np.pi * (t - x)) * (1.0 + 0.3j)
    s = FourierSampleSet(g, 1, 1)
    for idx in s.band_indices():
        j, kvec = idx[0], idx[1:]
        s.set_sample(j, kvec,
                     windowed_transform(g, field, s.tau_of(j), s.xi_of(kvec)))
    values = invert_samples_complex(s)
    assert np.max(np.abs(values - field)) < 1e-10


def test_incomplete_band_rejected():
    g = SpaceTimeGrid((9, 9), 8)
    s = FourierSampleSet(g, 1, 1)
    s.set_sample(0, (0, 0), 1.0)
    with pytest.raises(ValueError):
        invert_samples_complex(s)


def test_conjugate_symmetry_defect_flags_bad_data():
    g = SpaceTimeGrid((9, 9), 8)
    s = FourierSampleSet(g, 1, 1)
    for idx in s.band_indices():
        s.set_sample(idx[0], idx[1:], 1.0)
    assert s.conjugate_symmetry_defect() < 1e-15
    s.set_sample(1, (0, 0), 1.0 + 1.0j)   # breaks F(-j,-k) = conj F(j,k)
    assert s.conjugate_symmetry_defect() > 0.1


def test_analytic_q_bench_matches_quadrature():
    # the closed-form windowed transform of the Gaussian benchmark agrees
    # with brute-force quadrature up to the trapezoid error
    g = SpaceTimeGrid((33, 33), 64)
    q = benchmarks.q_bench(g)
    s = analytic_fourier("q_bench", g, 2, 2)
    worst = 0.0
    for idx in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (2, -1, 1), (-1, 2, -2)]:
        j, kvec = idx[0], idx[1:]
        brute = windowed_transform(g, q.values, s.tau_of(j), s.xi_of(kvec))
        worst = max(worst, abs(s.get_sample(j, kvec) - brute))
    assert worst < 2e-3 * abs(s.get_sample(0, (0, 0)))


def test_analytic_b_bench_matches_quadrature():
    g = SpaceTimeGrid((33, 33), 64)
    b = benchmarks.b_bench(g)
    for comp in range(2):
        s = analytic_fourier("b_bench", g, 1, 1, comp=comp)
        scale = max(np.max(np.abs(b.data[comp])), 1e-300)
        for idx in [(0, 0, 0), (1, 1, 0), (0, -1, 1)]:
            j, kvec = idx[0], idx[1:]
            brute = windowed_transform(g, b.data[comp],
                                       s.tau_of(j), s.xi_of(kvec))
            assert abs(s.get_sample(j, kvec) - brute) < 2e-3 * scale


def test_analytic_zero():
    g = SpaceTimeGrid((9, 9), 8)
    s = analytic_fourier("zero", g, 1, 1)
    assert s.band_complete()
    assert all(s.get_sample(idx[0], idx[1:]) == 0.0
               for idx in s.band_indices())


def test_analytic_inversion_roundtrip():
    # invert the exact q_bench spectrum: band-truncation is the only
    # error and the benchmark is smooth enough for <= 2% at (4, 4)
    g = SpaceTimeGrid((33, 33), 64)
    q = benchmarks.q_bench(g)
    s = analytic_fourier("q_bench", g, 4, 4)
    values, imag_ratio = invert_samples(s)
    rel = (np.linalg.norm(values - q.values)
           / np.linalg.norm(q.values))
    assert rel < 0.02
    assert imag_ratio < 1e-8
