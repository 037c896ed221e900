"""Geometric-optics probes: remainder bounds, transport, determinants,
dispersion matching and the probe cache."""

import numpy as np
import pytest

from schroinv.grid import BoundaryTrace, ComplexField, SpaceTimeGrid, sup_t_l2
from schroinv.probes import (
    ProbeSpec,
    axial_matched_offsets,
    build_u1_probe,
    build_v_probe_free,
    build_v_probe_lattice,
    build_vj_family,
    cached_u1_probe,
    dispersion_matched_direction,
    family_limit_determinant,
    lattice_adjoint_defect,
    lattice_forward_defect,
    probe_family_determinant,
    solve_transport,
)
from schroinv.solver import Potential


def smooth_q(g, amp=2.0):
    return Potential.from_function(
        g, lambda t, x, y: amp * np.sin(np.pi * t)
        * np.exp(-((x - 0.4) ** 2 + (y - 0.6) ** 2) / 0.08))


def test_spec_validation():
    with pytest.raises(ValueError):
        ProbeSpec(lam=8.0, omega=(1.0, 1.0))   # not unit
    with pytest.raises(ValueError):
        ProbeSpec(lam=-1.0, omega=(1.0, 0.0))
    with pytest.raises(ValueError):
        ProbeSpec(lam=8.0, omega=(1.0, 0.0), sign=0)


def test_spec_key_distinguishes_parameters():
    a = ProbeSpec(lam=8.0, omega=(1.0, 0.0))
    b = ProbeSpec(lam=8.0, omega=(0.0, 1.0))
    c = ProbeSpec(lam=8.0, omega=(1.0, 0.0), tau=1.0)
    assert len({a.key(), b.key(), c.key(), a.key(extra="x")}) == 4


def test_u1_probe_free_case_is_exact():
    # q = 0: the envelope is identically 1 and the remainder vanishes
    g = SpaceTimeGrid((17, 17), 16)
    p = build_u1_probe(Potential.zeros(g),
                       ProbeSpec(lam=8.0, omega=(1.0, 0.0)))
    assert np.max(np.abs(p.remainder.data)) < 1e-12
    assert p.reassembly_defect() == 0.0


def test_u1_remainder_stays_bounded():
    # lam ||R1|| + ||grad R1|| <= C uniformly in lam (the remainder
    # itself decays like 1/lam); the combination oscillates with lam but
    # must not grow
    g = SpaceTimeGrid((33, 33), 32)
    q = smooth_q(g)
    totals = [sum(build_u1_probe(q, ProbeSpec(lam=lam,
                                              omega=(0.6, 0.8))).norms)
              for lam in (4.0, 8.0, 16.0)]
    assert max(totals) <= 2.0
    # the L2 norm alone decays: lam ||R1|| at the top of the ladder is
    # no larger than at the bottom
    l2s = [build_u1_probe(q, ProbeSpec(lam=lam,
                                       omega=(0.6, 0.8))).norms[0] / lam
           for lam in (4.0, 16.0)]
    assert l2s[1] < l2s[0]


def test_v_free_probe_exact_modulation():
    # tau = |xi|^2 with xi orthogonal to omega makes the modulated wave
    # an exact continuum solution; the computed remainder is then pure
    # discretization error, small and shrinking under refinement
    xi = (0.0, 2 * np.pi)
    tau = (2 * np.pi) ** 2
    totals = []
    for m, nt in [(33, 32), (65, 64)]:
        g = SpaceTimeGrid((m, m), nt)
        p = build_v_probe_free(
            g, ProbeSpec(lam=4.0, omega=(1.0, 0.0), tau=tau, xi=xi, sign=1))
        totals.append(sum(p.norms))
    assert totals[0] < 10.0
    assert totals[1] < 0.4 * totals[0]


def test_v_probe_orthogonality_enforced():
    g = SpaceTimeGrid((17, 17), 16)
    with pytest.raises(ValueError):
        build_v_probe_free(
            g, ProbeSpec(lam=8.0, omega=(1.0, 0.0), xi=(1.0, 0.0), sign=1))


def test_lattice_probe_has_zero_defect():
    # the dispersion-matched adjoint wave solves the discrete free
    # equation exactly: remainder identically zero
    g = SpaceTimeGrid((33, 33), 64)
    lam, tau = 16.0, 2 * np.pi
    xi = np.array([2 * np.pi, -2 * np.pi])
    omega = dispersion_matched_direction(g, lam, tau, xi)
    assert lattice_adjoint_defect(g, lam, omega, tau, xi) < 1e-10
    p = build_v_probe_lattice(
        g, ProbeSpec(lam=lam, omega=tuple(omega), tau=tau, xi=tuple(xi),
                     sign=1))
    assert np.max(np.abs(p.remainder.data)) < 1e-10


def test_dispersion_matching_both_gauges():
    g = SpaceTimeGrid((33, 33), 64)
    lam, tau = 16.0, 4 * np.pi
    xi = np.array([2 * np.pi, 4 * np.pi])
    w_adj = dispersion_matched_direction(g, lam, tau, xi, gauge="adjoint")
    w_fwd = dispersion_matched_direction(g, lam, tau, xi, gauge="forward")
    assert abs(np.linalg.norm(w_adj) - 1.0) < 1e-12
    assert abs(np.linalg.norm(w_fwd) - 1.0) < 1e-12
    assert lattice_adjoint_defect(g, lam, w_adj, tau, xi) < 1e-10
    assert lattice_forward_defect(g, lam, w_fwd, tau, xi) < 1e-10


def test_dispersion_matching_rejects_zero_xi():
    g = SpaceTimeGrid((17, 17), 16)
    with pytest.raises(ValueError):
        dispersion_matched_direction(g, 8.0, 1.0, np.zeros(2))


def test_axial_offsets_solve_matching_equation():
    g = SpaceTimeGrid((33, 33), 64)
    lam, tau = 16.0, 2 * np.pi
    for gauge in ("adjoint", "forward"):
        pairs = axial_matched_offsets(g, lam, tau, axis=0, gauge=gauge)
        assert len(pairs) == 2
        for omega, delta in pairs:
            xi = delta * np.array([1.0, 0.0])
            defect = (lattice_adjoint_defect(g, lam, omega, tau, xi)
                      if gauge == "adjoint"
                      else lattice_forward_defect(g, lam, omega, tau, xi))
            assert defect < 1e-9
        # the two offsets bracket zero (opposite directions)
        assert pairs[0][1] * pairs[1][1] < 0 or tau == 0


def test_transport_constant_rhs():
    # omega . grad A = -c with zero inflow data: A = -c * (distance
    # along the ray from the inflow boundary)
    g = SpaceTimeGrid((33, 33), 8)
    omega = np.array([1.0, 0.0])
    rhs = ComplexField(g, np.full(g.shape, 2.0 + 0j))
    A = solve_transport(g, omega, rhs)
    t, x, y = g.spacetime_mesh()
    exact = -2.0 * x
    interior = (slice(None), slice(1, -1), slice(1, -1))
    assert np.max(np.abs(A.data - exact)[interior]) < 1e-10


def test_transport_diagonal_direction():
    # along omega = (1,1)/sqrt(2) the ray length is sqrt(2) min(x, y)
    g = SpaceTimeGrid((33, 33), 4)
    omega = np.array([1.0, 1.0]) / np.sqrt(2.0)
    rhs = ComplexField(g, np.ones(g.shape, dtype=complex))
    A = solve_transport(g, omega, rhs)
    t, x, y = g.spacetime_mesh()
    exact = -np.sqrt(2.0) * np.minimum(x, y)
    assert np.max(np.abs(A.data - exact)) < 5e-3


def test_family_determinant_approaches_limit():
    g = SpaceTimeGrid((33, 33), 32)
    q = smooth_q(g, amp=1.0)
    omegas = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    limit = family_limit_determinant(omegas)
    assert limit == 1.0
    fam = build_vj_family(q, 16.0, omegas, order=1)
    det = probe_family_determinant(fam)
    assert float(det.min()) >= 0.5 * limit


def test_family_rejects_dependent_directions():
    g = SpaceTimeGrid((17, 17), 8)
    with pytest.raises(ValueError):
        build_vj_family(Potential.zeros(g), 8.0,
                        [np.array([1.0, 0.0]), np.array([1.0, 1e-9])])


def test_resolution_cap_enforced():
    g = SpaceTimeGrid((17, 17), 16)   # h = 1/16, cap lam <= 8
    with pytest.raises(ValueError):
        build_u1_probe(Potential.zeros(g),
                       ProbeSpec(lam=64.0, omega=(1.0, 0.0)))


def test_probe_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("SCHROINV_CACHE_DIR", str(tmp_path))
    g = SpaceTimeGrid((17, 17), 16)
    q = smooth_q(g)
    spec = ProbeSpec(lam=8.0, omega=(1.0, 0.0))
    p1 = cached_u1_probe(q, spec)
    files = list(tmp_path.glob("*.srf1"))
    assert files, "cache miss should write a file"
    p2 = cached_u1_probe(q, spec)
    assert np.array_equal(p1.remainder.data, p2.remainder.data)
    # a different potential must not hit the same entry
    p3 = cached_u1_probe(smooth_q(g, amp=5.0), spec)
    assert not np.allclose(p1.remainder.data, p3.remainder.data)
