"""Recovery of the quadratic-flux coefficient b from boundary measurements.

This pipeline runs after the potential has been recovered.  For a family
of adjoint probes v_j (solutions of -i v_t + Lap v + q v = 0 built with
the recovered q), each second-order measurement pairs against v_j
through a boundary-only identity whose interior side is

    int over (0,T) x Omega of (b . grad v_j) * (grad u1^(1) . conj grad u1^(2)),

with the two first-order waves chosen so the cross product of their
gradients is (up to a known constant and O(1/lambda)) a pure modulation.
Polarization over the four input combinations phi1 +/- phi2, phi1 +/- i
phi2 isolates exactly this cross term from physical quadratic data; the
direct source shortcuts it by driving the second-order equation with the
cross flux itself.

Each assembled value is one Fourier sample of the demodulated field
beta_j = conj(P_j) b . grad v_j (P_j the probe's unimodular carrier);
inverting the sampled band gives beta_j(t,x), and a pointwise n x n
solve across the probe family returns b(t,x).

As in the q pipeline, the boundary assembly is written in the time
stepper's own summation-by-parts form: the probes are exact discrete
adjoint solutions (conjugated forward sweeps), so the assembled boundary
expression equals the interior discrete sum to roundoff whenever the
probe potential matches the medium's.  With the recovered potential the
residual mismatch is second order in the q-reconstruction error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier import FourierSampleSet, invert_samples_complex
from .grid import (
    BoundaryTrace,
    ComplexField,
    SpaceTimeGrid,
    VectorField,
    gradient_all,
    norm_l2_spacetime,
)
from .measurement import (
    Measurement,
    _normal_J_trace,
    apply_io_map,
    discrete_normal_flux,
    extract_linearizations,
)
from .probes import (
    ProbeSpec,
    axial_matched_offsets,
    dispersion_matched_direction,
    lattice_symbols,
)
from .reconstruct_q import (
    _half_levels,
    _transverse_interior,
    largest_admissible_lambda,
)
from .solver import (
    NonlinearitySpec,
    Potential,
    divergence_of_flux,
    prune_stepper_cache,
    solve_adjoint,
    solve_linear_envelope,
    solve_source,
)

DEFAULT_B_J_MAX = 2
DEFAULT_B_K_MAX = 3
DEFAULT_CARRIER_MODE = 1


# ---------------------------------------------------------------------------
# adjoint probe family


@dataclass
class AdjointProbe:
    """One potential-carrying adjoint solution with a known carrier.

    field solves the discrete adjoint equation exactly (it is a
    conjugated forward sweep); its carrier P = e^{i(kappa.x + sigma t)}
    is aligned with the grid's dual lattice in space and matched to the
    stepper's dispersion in time, so conj(P) * field is a slow amplitude.
    """

    grid: SpaceTimeGrid
    kappa: np.ndarray            # spatial carrier wavevector (lattice-aligned)
    kappa_index: tuple[int, ...]  # kappa in dual-lattice integer units
    sigma: float                 # discrete-matched temporal frequency
    field: np.ndarray            # v-tilde, shape (nt+1, *m)

    @property
    def lam(self) -> float:
        return float(np.linalg.norm(self.kappa))

    def phase(self) -> np.ndarray:
        t, *xs = self.grid.spacetime_mesh()
        s = self.sigma * t
        for kk, x in zip(self.kappa, xs):
            s = s + kk * x
        return np.exp(1j * np.broadcast_to(s, self.grid.shape))

    def amplitude(self) -> np.ndarray:
        """Slow envelope conj(P) * field (== 1 for q = 0)."""
        return np.conj(self.phase()) * self.field

    def demodulated_rows(self) -> np.ndarray:
        """conj(P) * stencil gradient of the probe, shape (n, nt+1, *m).

        These are the rows of the pointwise linear system; the same
        discrete gradient underlies the assembled identity, so using it
        here keeps the recovery self-consistent (no stencil-symbol bias).
        """
        grads = gradient_all(ComplexField(self.grid, self.field)).data
        return np.conj(self.phase())[np.newaxis] * grads


def build_adjoint_probe(q: Potential, axis: int = 0,
                        mode: int = DEFAULT_CARRIER_MODE) -> AdjointProbe:
    """Adjoint probe along a coordinate axis with a lattice-aligned carrier.

    kappa = (2 pi mode / box[axis]) e_axis sits exactly on the spatial
    dual lattice, so demodulating by the carrier shifts spectra by whole
    lattice steps; sigma is the temporal frequency at which the free
    Crank-Nicolson sweep propagates that spatial mode exactly.  The probe
    is the conjugated forward solve with data given by the carrier, hence
    an exact discrete adjoint solution of the potential-carrying equation.
    """
    g = q.grid
    if mode <= 0:
        raise ValueError("carrier mode must be a positive integer")
    kappa = np.zeros(g.n)
    kappa[axis] = 2.0 * np.pi * mode / g.box[axis]
    _, kappa2_star = lattice_symbols(g, kappa)
    sigma = (2.0 / g.dt) * np.arctan(0.5 * kappa2_star * g.dt)
    kidx = tuple(mode if a == axis else 0 for a in range(g.n))

    # carrier values with the *discrete* time factor, exact per level
    xs = g.space_mesh()
    sx = kappa[axis] * xs[axis]
    phi = np.exp(1j * np.broadcast_to(sx, g.m))
    st = np.exp(1j * sigma * g.times())
    data = ComplexField(g, st.reshape((-1,) + (1,) * g.n)
                        * phi[np.newaxis])
    f = BoundaryTrace.from_field(data, with_final=False)
    v = solve_adjoint(q, data.data[0], f)
    return AdjointProbe(g, kappa, kidx, float(sigma), v.data)


# ---------------------------------------------------------------------------
# polarization over input pairs


@dataclass
class PolarizedDatum:
    """Second-order measurements of the four combinations of two inputs.

    plus/minus/plus_i/minus_i hold Lambda_b evaluated on inputs
    (phi1 + s phi2, f1 + s f2) for s = +1, -1, +i, -i.
    """

    plus: Measurement
    minus: Measurement
    plus_i: Measurement
    minus_i: Measurement

    def cross(self) -> Measurement:
        """The record driven by grad u1^(1) . conj grad u1^(2) alone.

        Lambda_b is linear in its quadratic source; the signed average
        cancels the two diagonal terms and the conjugate cross term.
        """
        re = (self.plus - self.minus) * 0.25
        im = (self.plus_i - self.minus_i) * 0.25
        return re + 1j * im

# ---------------------------------------------------------------------------
# boundary assembly


def assemble_b_identity(lambda_b_data: Measurement,
                        probe_v: AdjointProbe) -> complex:
    """Boundary side of the second-order identity.

    Returns the value of int over the cylinder of (b . grad v) times the
    gradient form that drove the measurement, assembled from the
    measured final slice and flux trace alone:

        - i int u2(T) v(T) - int_Sigma [dnu(u2) - nu.J] v.

    Written against the stepper's summation-by-parts structure, so with
    matching potentials the equality with the interior discrete sum is
    exact; the coefficient must vanish on the lateral boundary (the
    benchmark family does by construction), which folds the nu.b-term of
    the continuum identity into the measured flux.
    """
    g = lambda_b_data.grid
    if probe_v.grid != g:
        raise ValueError("measurement and probe live on different grids")
    vt = probe_v.field
    dt, h = g.dt, g.h
    cell = float(np.prod(h))
    core = g.interior_slices()

    total = 1j * cell * np.sum((lambda_b_data.final * vt[-1])[core])
    for face in g.faces():
        axis, side = face
        flux = _transverse_interior(lambda_b_data.flux.faces[face])
        sl = [slice(None)] * (g.n + 1)
        sl[1 + axis] = -1 if side else 0
        v_b = _transverse_interior(vt[tuple(sl)])
        total += (dt * cell / h[axis]) * np.sum(
            _half_levels(flux) * _half_levels(v_b))
    return complex(-total)


# ---------------------------------------------------------------------------
# measurement sources


def _pair_envelopes(q: Potential, spec_mod: ProbeSpec, spec_plain: ProbeSpec):
    """Gauged first-order solves of the modulated/plain probe pair.

    Returns (carrier, w1, w2) with u1^(1) = phase * w1 (data modulated by
    e^{i(tau t + xi.x)}) and u1^(2) = phase * w2 (pure carrier data).
    """
    g = q.grid
    if (spec_mod.lam != spec_plain.lam
            or tuple(spec_mod.omega) != tuple(spec_plain.omega)):
        raise ValueError("pair must share (lambda, omega)")
    car = spec_mod.carrier()
    from .probes import _modulation
    mod = _modulation(g, spec_mod.tau, spec_mod.xi_vec)
    phase = car.phase_spacetime(g)
    ansatz1 = ComplexField(g, phase * mod)
    f1 = BoundaryTrace.from_field(ansatz1, with_final=False)
    w1 = solve_linear_envelope(q, ansatz1.data[0], f1, car)
    phi2 = car.phase_slice(g, 0.0)
    f2 = BoundaryTrace(g, {face: car.phase_face(g, face)
                           for face in g.faces()})
    w2 = solve_linear_envelope(q, phi2, f2, car)
    return car, w1, w2


def cross_gradient_form(q: Potential, spec_mod: ProbeSpec,
                        spec_plain: ProbeSpec) -> np.ndarray:
    """grad u1^(1) . conj grad u1^(2) on the grid (carrier phases cancel)."""
    g = q.grid
    car, w1, w2 = _pair_envelopes(q, spec_mod, spec_plain)
    grad1 = car.gradient_of_carried(g, w1)
    grad2 = car.gradient_of_carried(g, w2)
    return np.sum(grad1 * np.conj(grad2), axis=0)


class DirectBSource:
    """Serves cross-polarized second-order records computed directly.

    The cross record is the response of the second-order equation to the
    flux b * (grad u1^(1) . conj grad u1^(2)) — exactly what polarizing
    four physical measurements isolates, at a third of the solve count.
    """

    mode = "direct"

    def __init__(self, q: Potential, b: VectorField):
        self.q = q
        self.b = b

    def cross_datum(self, spec_mod: ProbeSpec,
                    spec_plain: ProbeSpec) -> Measurement:
        g = self.q.grid
        form = cross_gradient_form(self.q, spec_mod, spec_plain)
        J = np.asarray(self.b.data) * form[np.newaxis]
        u2 = solve_source(self.q, divergence_of_flux(g, J))
        flux = discrete_normal_flux(u2) - _normal_J_trace(g, J)
        return Measurement(g, u2.data[-1].copy(), flux, None,
                           spec_mod.key(extra=spec_plain.key()))


class PolarizedBSource:
    """Serves the same records by polarizing full nonlinear measurements.

    For each input combination phi1 + s phi2 the input-output map is run
    at (eps, 2 eps), the second-order coefficient g2 extracted, and the
    four extractions combined; agrees with the direct source up to the
    O(eps) extraction error.
    """

    mode = "polarized"

    def __init__(self, q: Potential, nl: NonlinearitySpec, eps: float = 1e-6,
                 picard_tol: float = 1e-7):
        self.q = q
        self.nl = nl
        self.eps = eps
        self.picard_tol = picard_tol

    def measure_polarized(self, spec_mod: ProbeSpec,
                          spec_plain: ProbeSpec) -> PolarizedDatum:
        g = self.q.grid
        car = spec_mod.carrier()
        from .probes import _modulation
        mod = _modulation(g, spec_mod.tau, spec_mod.xi_vec)
        u1a = car.phase_spacetime(g) * mod
        u1b = car.phase_spacetime(g)
        pair_id = spec_mod.key(extra=spec_plain.key())
        records = []
        for s in (1.0, -1.0, 1j, -1j):
            data = ComplexField(g, u1a + s * u1b)
            f = BoundaryTrace.from_field(data, with_final=False)
            m1 = apply_io_map(self.q, self.nl, data.data[0], f, self.eps,
                              input_id=pair_id, carrier=car,
                              picard_tol=self.picard_tol)
            m2 = apply_io_map(self.q, self.nl, data.data[0], f,
                              2.0 * self.eps, input_id=pair_id, carrier=car,
                              picard_tol=self.picard_tol, seed=m1)
            records.append(extract_linearizations(m1, m2).g2)
        return PolarizedDatum(*records)

    def cross_datum(self, spec_mod: ProbeSpec,
                    spec_plain: ProbeSpec) -> Measurement:
        return self.measure_polarized(spec_mod, spec_plain).cross()


# ---------------------------------------------------------------------------
# Fourier sampling of the demodulated probe form


@dataclass
class BvField:
    """Recovered b . grad v for one probe, in demodulated form."""

    probe: AdjointProbe
    amplitude: np.ndarray          # beta = conj(P) * (b . grad v)
    samples: FourierSampleSet

    def values(self) -> np.ndarray:
        """The oscillatory field B_v itself (carrier restored)."""
        return self.probe.phase() * self.amplitude


def _one_bv_sample(source, q_grid: SpaceTimeGrid, lam: float, tau_eff: float,
                   xi_eff: np.ndarray, omega: np.ndarray,
                   probe_v: AdjointProbe) -> complex:
    spec_mod = ProbeSpec(lam=lam, omega=tuple(omega), tau=tau_eff,
                         xi=tuple(xi_eff), sign=-1)
    spec_plain = ProbeSpec(lam=lam, omega=tuple(omega), sign=-1)
    datum = source.cross_datum(spec_mod, spec_plain)
    value = assemble_b_identity(datum, probe_v)
    # leading coefficient of the cross form: lam^2 - lam omega . xi*
    xi_star, _ = lattice_symbols(q_grid, xi_eff)
    norm = lam * lam - lam * float(np.asarray(omega) @ xi_star)
    # Crank-Nicolson half-level attenuation: the assembly averages the
    # source (dominant temporal mode tau_eff) and the probe (mode sigma)
    # separately, so their product picks up a known cosine ratio relative
    # to the continuum pairing at the sample frequency tau_eff + sigma.
    dt = q_grid.dt
    atten = (np.cos(0.5 * tau_eff * dt) * np.cos(0.5 * probe_v.sigma * dt)
             / np.cos(0.5 * (tau_eff + probe_v.sigma) * dt))
    return value / (norm * atten)


def sample_bv_fourier(source, probe_v: AdjointProbe, lam: float, tau: float,
                      xi, richardson: bool = False) -> complex:
    """One Fourier sample of beta = conj(P) b . grad v at (tau, xi).

    The probe pair's modulation is shifted by the probe carrier,
    (tau', xi') = (tau - sigma, xi - kappa), so the assembled integral
    carries exactly the demodulating factor; the pair direction is
    dispersion matched in the forward gauge.  Requires xi != kappa (the
    degenerate carrier column is recovered by `sample_bv_carrier_column`
    from off-lattice offsets instead).  Optionally
    Richardson-extrapolates the O(1/lambda) remainder.
    """
    g = probe_v.grid
    tau_eff = tau - probe_v.sigma
    xi_eff = np.asarray(xi, dtype=float) - probe_v.kappa
    if not np.any(np.abs(xi_eff) > 1e-12):
        raise ValueError("xi = kappa is degenerate for the probe pair; "
                         "use sample_bv_carrier_column")

    def at(lam_):
        omega = dispersion_matched_direction(g, lam_, tau_eff, xi_eff,
                                             gauge="forward")
        return _one_bv_sample(source, g, lam_, tau_eff, xi_eff, omega,
                              probe_v)

    value = at(lam)
    if richardson:
        value = 2.0 * value - at(lam / 2.0)
    return value


def _window_transform(grid: SpaceTimeGrid, axis: int, mu: float) -> complex:
    """Trapezoid transform of e^{i mu x} over one spatial axis of the box."""
    x = np.linspace(0.0, grid.box[axis], grid.m[axis])
    w = np.full(grid.m[axis], grid.h[axis])
    w[0] *= 0.5
    w[-1] *= 0.5
    return complex(np.sum(w * np.exp(1j * mu * x)))


def sample_bv_carrier_column(source, probe_v: AdjointProbe, lam: float,
                             tau: float,
                             neighbors: dict[int, complex]) -> complex:
    """Sample of beta-hat at the probe carrier's own column xi = kappa.

    A pair modulation with xi' = 0 has no dispersion-matched direction
    (two forward waves whose spatial frequencies agree share a temporal
    frequency), so the column is reached indirectly: the pair is matched
    at the two axial offsets xi' = +/-delta e_axis, which measures
    beta-hat off the dual lattice, at kappa +/- delta e_axis.  Because
    beta's profile along the carrier axis is a trigonometric polynomial
    times a slow window, each off-lattice value is the window transform
    of the on-lattice coefficients; subtracting the already-sampled
    neighbors (passed as {m: beta-hat(tau, kappa + 2 pi m e_axis)}) and
    dividing by the window at the offset recovers the missing
    coefficient.  The two offsets are averaged.
    """
    g = probe_v.grid
    axis = int(np.argmax(np.abs(probe_v.kappa)))
    step = 2.0 * np.pi / g.box[axis]
    tau_eff = tau - probe_v.sigma
    estimates = []
    for omega, delta in axial_matched_offsets(g, lam, tau_eff, axis=axis,
                                              gauge="forward"):
        off = np.zeros(g.n)
        off[axis] = delta
        value = _one_bv_sample(source, g, lam, tau_eff, off, omega, probe_v)
        for m, cm in neighbors.items():
            value -= cm * _window_transform(g, axis, delta + step * m)
        estimates.append(value / _window_transform(g, axis, delta))
    return 0.5 * (estimates[0] + estimates[1])


def recover_bv(source, probe_v: AdjointProbe,
               j_max: int = DEFAULT_B_J_MAX, k_max: int = DEFAULT_B_K_MAX,
               lam: float | None = None, richardson: bool = False,
               progress=None) -> BvField:
    """Sample the full band for one probe and invert.

    beta is complex, so no conjugate fill applies: every lattice point of
    the band is sampled.
    """
    g = probe_v.grid
    if lam is None:
        lam = largest_admissible_lambda(g)
    samples = FourierSampleSet(g, j_max, k_max)
    band = samples.band_indices()
    axis = int(np.argmax(np.abs(probe_v.kappa)))
    column = [idx for idx in band if idx[1:] == probe_v.kappa_index]
    regular = [idx for idx in band if idx[1:] != probe_v.kappa_index]
    for count, idx in enumerate(regular):
        j, kvec = idx[0], idx[1:]
        val = sample_bv_fourier(source, probe_v, lam, samples.tau_of(j),
                                samples.xi_of(kvec), richardson=richardson)
        samples.set_sample(j, kvec, val, lam=lam)
        prune_stepper_cache()
        if progress is not None:
            progress(count + 1, len(band), idx)
    # the carrier's own column last: it deconvolves against the sampled
    # neighbors along the carrier axis
    for count, idx in enumerate(column):
        j, kvec = idx[0], idx[1:]
        neighbors = {}
        for m in range(-k_max - kvec[axis], k_max - kvec[axis] + 1):
            if m == 0:
                continue
            nb = list(kvec)
            nb[axis] += m
            neighbors[m] = samples.get_sample(j, tuple(nb))
        val = sample_bv_carrier_column(source, probe_v, lam,
                                       samples.tau_of(j), neighbors)
        samples.set_sample(j, kvec, val, lam=lam)
        prune_stepper_cache()
        if progress is not None:
            progress(len(regular) + count + 1, len(band), idx)
    amplitude = invert_samples_complex(samples)
    return BvField(probe_v, amplitude, samples)


# ---------------------------------------------------------------------------
# pointwise solve


def default_det_threshold(probes: list[AdjointProbe]) -> float:
    """0.1 lam^n |det of the probe direction matrix| (its lam -> inf limit)."""
    lam = probes[0].lam
    dirs = np.stack([p.kappa / max(np.linalg.norm(p.kappa), 1e-300)
                     for p in probes])
    return 0.1 * lam ** len(probes) * abs(float(np.linalg.det(dirs)))


def solve_pointwise_b(bv_fields: list[BvField],
                      delta_det: float | None = None,
                      max_rejected: float = 0.2):
    """Per-node solve of the n x n system rows = grad v_j, rhs = B_vj.

    Demodulated rows and amplitudes are used (the unimodular carrier of
    each row cancels against its right-hand side).  Nodes whose row
    determinant falls below delta_det are filled from the nearest
    accepted node and flagged.  Returns (b, report) with b real-valued;
    raises if more than max_rejected of the nodes fail the threshold.
    """
    probes = [f.probe for f in bv_fields]
    g = probes[0].grid
    n = g.n
    if len(bv_fields) != n:
        raise ValueError(f"need exactly n={n} probes")
    if delta_det is None:
        delta_det = default_det_threshold(probes)
    rows = np.stack([np.moveaxis(p.demodulated_rows(), 0, -1)
                     for p in probes], axis=-2)    # (..., j, a)
    rhs = np.stack([f.amplitude for f in bv_fields], axis=-1)  # (..., j)
    det = np.linalg.det(rows)
    mask = np.abs(det) >= delta_det
    coverage = float(np.mean(mask))
    if coverage < 1.0 - max_rejected:
        raise ValueError(
            f"probe family degenerate on {100 * (1 - coverage):.1f}% of "
            f"nodes (threshold {delta_det:.3g}); choose other directions")
    sol = np.zeros(rhs.shape, dtype=complex)
    sol[mask] = np.linalg.solve(rows[mask], rhs[mask][..., np.newaxis])[..., 0]
    if not mask.all():
        from scipy.ndimage import distance_transform_edt
        idx = distance_transform_edt(~mask, sampling=(g.dt, *g.h),
                                     return_distances=False,
                                     return_indices=True)
        sol[~mask] = sol[tuple(i[~mask] for i in idx)]
    imag_ratio = float(
        np.linalg.norm(sol.imag) / max(np.linalg.norm(sol.real), 1e-300))
    b = VectorField(g, np.moveaxis(sol.real, -1, 0).copy(), )
    report = {
        "delta_det": float(delta_det),
        "det_coverage": coverage,
        "imag_ratio": imag_ratio,
        "filled_nodes": int(np.sum(~mask)),
    }
    return b, report


# ---------------------------------------------------------------------------
# end-to-end pipeline


def run_b_reconstruction(source, q_probes: Potential,
                         j_max: int = DEFAULT_B_J_MAX,
                         k_max: int = DEFAULT_B_K_MAX,
                         lam: float | None = None,
                         carrier_mode: int = DEFAULT_CARRIER_MODE,
                         richardson: bool = False,
                         progress=None):
    """Full second-stage pipeline: probe family, band sweep, pointwise solve.

    q_probes is the potential carried by the adjoint probes — the
    recovered one in the genuine inverse problem.  Returns
    (b, bv_fields, report).
    """
    g = q_probes.grid
    if lam is None:
        lam = largest_admissible_lambda(g)
    probes = [build_adjoint_probe(q_probes, axis=a, mode=carrier_mode)
              for a in range(g.n)]
    fields = []
    for jp, probe in enumerate(probes):
        def sub_progress(i, total, idx, jp=jp):
            if progress is not None:
                progress(jp * total + i, len(probes) * total, idx)
        fields.append(recover_bv(source, probe, j_max=j_max, k_max=k_max,
                                 lam=lam, richardson=richardson,
                                 progress=sub_progress))
    b, solve_report = solve_pointwise_b(fields)
    report = {
        "mode": getattr(source, "mode", "unknown"),
        "lambda_used": float(lam),
        "probe_lambda": float(probes[0].lam),
        "j_max": j_max,
        "k_max": k_max,
        "richardson": bool(richardson),
        "n_samples": len(fields[0].samples.band_indices()) * len(probes),
    }
    report.update(solve_report)
    return b, fields, report


def b_reconstruction_report(recovered: VectorField, reference: VectorField,
                            base: dict | None = None) -> dict:
    """Relative vector-L2 and sup errors of a recovered coefficient."""
    g = recovered.grid
    diff = np.asarray(recovered.data) - np.asarray(reference.data)
    num = np.sqrt(sum(
        norm_l2_spacetime(ComplexField(g, diff[a] + 0j)) ** 2
        for a in range(g.n)))
    den = np.sqrt(sum(
        norm_l2_spacetime(ComplexField(g, np.asarray(reference.data)[a] + 0j)) ** 2
        for a in range(g.n)))
    report = dict(base or {})
    report["l2_rel"] = float(num / max(den, 1e-300))
    report["linf_rel"] = float(np.max(np.abs(diff))
                               / max(np.max(np.abs(reference.data)), 1e-300))
    return report


def reconstruct_b_bench(grid: SpaceTimeGrid, q_probes: Potential | None = None,
                        mode: str = "direct", **kwargs):
    """End-to-end run against the standard benchmark pair.

    q_probes defaults to the true q_bench (certification setting); pass
    the recovered potential for the genuine two-stage inverse run.
    """
    from . import benchmarks

    q = benchmarks.q_bench(grid)
    b = benchmarks.b_bench(grid)
    if mode == "direct":
        source = DirectBSource(q, b)
    elif mode == "polarized":
        source = PolarizedBSource(
            q, NonlinearitySpec(b=b, remainder_kind="cubic_flat"))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rec, fields, report = run_b_reconstruction(
        source, q_probes if q_probes is not None else q, **kwargs)
    report = b_reconstruction_report(rec, b, report)
    return rec, fields, report
