"""Synthetic input-output measurements and their linearizations.

The forward apparatus runs the nonlinear solve for data (eps*phi, eps*f)
and records what a boundary observer would see: the final-time field and
the nonlinear boundary flux.  The flux observable is the grid's own
one-sided normal difference — the conormal trace consistent with the
discrete scheme — minus the normal component of the nonlinearity's flux
J(t,x,grad u).  Richardson extraction over two amplitudes then recovers
the first- and second-order linearized maps that the reconstruction
pipelines consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    BoundaryTrace,
    ComplexField,
    SpaceTimeGrid,
    _face_index,
    gradient_all,
)
from .probes import ProbeSpec
from .solver import (
    Carrier,
    NonlinearitySpec,
    Potential,
    compute_u2,
    solve_linear,
    solve_nonlinear,
)
from .srf1 import read_bundle, write_bundle


@dataclass
class Measurement:
    """One record of the input-output map for a single input.

    final: the field at t=T over all of Omega; flux: lateral trace of
    the measured conormal data (one-sided normal difference minus
    nu.J); eps: amplitude used (None for linearized records);
    input_id: identifier of the (phi, f) pair that produced it.
    """

    grid: SpaceTimeGrid
    final: np.ndarray
    flux: BoundaryTrace
    eps: float | None = None
    input_id: str = ""

    def __post_init__(self):
        self.final = np.asarray(self.final, dtype=complex)
        if self.final.shape != self.grid.m:
            raise ValueError("final slice shape mismatch")
        if self.flux.grid is not self.grid and self.flux.grid != self.grid:
            raise ValueError("flux trace lives on a different grid")
        if self.flux.final is not None:
            raise ValueError("flux is a lateral trace; no final slice allowed")

    # linear algebra over records (Richardson extraction, polarization)
    def _combine(self, other: "Measurement", ca: complex, cb: complex,
                 input_id: str | None = None) -> "Measurement":
        if other.grid != self.grid:
            raise ValueError("measurement grids differ")
        if input_id is None:
            if self.input_id != other.input_id:
                raise ValueError(
                    f"combining measurements of different inputs "
                    f"({self.input_id!r} vs {other.input_id!r})")
            input_id = self.input_id
        faces = {face: ca * self.flux.faces[face] + cb * other.flux.faces[face]
                 for face in self.grid.faces()}
        return Measurement(self.grid, ca * self.final + cb * other.final,
                           BoundaryTrace(self.grid, faces), None, input_id)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, c):
        faces = {face: c * arr for face, arr in self.flux.faces.items()}
        return Measurement(self.grid, c * self.final,
                           BoundaryTrace(self.grid, faces), None, self.input_id)

    __rmul__ = __mul__

    def conj(self) -> "Measurement":
        faces = {face: np.conj(arr) for face, arr in self.flux.faces.items()}
        return Measurement(self.grid, np.conj(self.final),
                           BoundaryTrace(self.grid, faces), self.eps,
                           self.input_id)


@dataclass
class LinearizedPair:
    """Order-eps and order-eps^2 coefficients extracted from measurements."""

    g1: Measurement
    g2: Measurement


def discrete_normal_flux(field: ComplexField) -> BoundaryTrace:
    """Outward one-sided normal difference (u_bnd - u_depth1)/h per face.

    This is the conormal observable matched to the interior stencils:
    boundary identities assembled from it telescope against the scheme
    exactly, with no independent discretization defect.
    """
    g = field.grid
    faces = {}
    for face in g.faces():
        axis, side = face
        bnd = [slice(None)] * (g.n + 1)
        depth1 = [slice(None)] * (g.n + 1)
        bnd[1 + axis] = -1 if side else 0
        depth1[1 + axis] = -2 if side else 1
        faces[face] = (field.data[tuple(bnd)]
                       - field.data[tuple(depth1)]) / g.h[axis]
    return BoundaryTrace(g, faces)


def _normal_J_trace(grid: SpaceTimeGrid, J: np.ndarray) -> BoundaryTrace:
    """nu . J restricted to each lateral face (J of shape (n, nt+1, *m))."""
    faces = {}
    for face in grid.faces():
        axis, side = face
        nu = 1.0 if side else -1.0
        idx = (axis, slice(None)) + _face_index(grid, face)
        faces[face] = nu * J[idx]
    return BoundaryTrace(grid, faces)


def apply_io_map(q: Potential, nl: NonlinearitySpec, phi: np.ndarray,
                 f: BoundaryTrace, eps: float, input_id: str = "",
                 carrier: Carrier | None = None,
                 picard_tol: float | None = None,
                 seed: "Measurement | None" = None) -> Measurement:
    """Evaluate the input-output map on (eps*phi, eps*f).

    Returns the final-time field and the flux trace
    [one-sided normal difference of u] - nu.J(t,x,grad u).  A `seed`
    measurement of the same input at another eps warm-starts the solve:
    the linear part rescales exactly and the correction by its leading
    eps^2 law.
    """
    kwargs = {} if picard_tol is None else {"picard_tol": picard_tol}
    prev = getattr(seed, "_solution", None)
    if prev is not None and seed.eps:
        scale = eps / seed.eps
        kwargs["lin_env"] = scale * prev.carried_envelope
        kwargs["r_init"] = scale**2 * prev.residual_part
    sol = solve_nonlinear(q, nl, phi, f, eps, carrier=carrier, **kwargs)
    field = sol.field
    flux = discrete_normal_flux(field)
    if not nl.is_trivial():
        J = nl.flux(q.grid, sol.gradient())
        flux = flux - _normal_J_trace(q.grid, J)
    meas = Measurement(q.grid, field.data[-1].copy(), flux, eps, input_id)
    meas._solution = sol  # stashed for warm starts; not serialized
    return meas


def extract_linearizations(meas_at_eps: Measurement,
                           meas_at_2eps: Measurement) -> LinearizedPair:
    """Richardson extraction from measurements at eps and 2*eps.

    With Lambda = eps*g1 + eps^2*g2 + O(eps^3):
        g1 = (4 Lambda(eps) - Lambda(2 eps)) / (2 eps)   + O(eps^2)
        g2 = (Lambda(2 eps) - 2 Lambda(eps)) / (2 eps^2) + O(eps)
    Exact when the cubic term vanishes.
    """
    e = meas_at_eps.eps
    if e is None or meas_at_2eps.eps is None:
        raise ValueError("extraction needs the eps of both measurements")
    if abs(meas_at_2eps.eps - 2.0 * e) > 1e-12 * abs(e):
        raise ValueError("second measurement must be taken at exactly 2*eps")
    if meas_at_eps.input_id != meas_at_2eps.input_id:
        raise ValueError("measurements correspond to different inputs")
    g1 = meas_at_eps._combine(meas_at_2eps, 4.0 / (2.0 * e), -1.0 / (2.0 * e))
    g2 = meas_at_eps._combine(meas_at_2eps, -2.0 / (2.0 * e**2),
                              1.0 / (2.0 * e**2))
    return LinearizedPair(g1, g2)


def lambda_q(q: Potential, phi: np.ndarray, f: BoundaryTrace,
             input_id: str = "",
             carrier: Carrier | None = None) -> Measurement:
    """First-order map evaluated directly: (u1(T), one-sided flux of u1)."""
    u1 = solve_linear(q, phi, f, carrier=carrier)
    return Measurement(q.grid, u1.data[-1].copy(), discrete_normal_flux(u1),
                       None, input_id)


def lambda_b(q: Potential, nl: NonlinearitySpec, phi: np.ndarray,
             f: BoundaryTrace, input_id: str = "",
             carrier: Carrier | None = None) -> Measurement:
    """Second-order map evaluated directly from u1 and u2.

    Returns (u2(T), [one-sided flux of u2 - nu.J(grad u1)]).
    """
    g = q.grid
    u1 = solve_linear(q, phi, f, carrier=carrier)
    if carrier is not None:
        grad_u1 = carrier.gradient_of_carried(
            g, u1.data * np.conj(carrier.phase_spacetime(g)))
    else:
        grad_u1 = gradient_all(u1).data
    flux = BoundaryTrace.zeros(g)
    if nl.b is not None:
        u2 = compute_u2(q, nl.b, u1, grad_u1=grad_u1)
        flux = discrete_normal_flux(u2)
        sq = np.sum(grad_u1 * np.conj(grad_u1), axis=0).real
        J = sq[np.newaxis] * np.asarray(nl.b.data, dtype=float)
        flux = flux - _normal_J_trace(g, J)
        final = u2.data[-1].copy()
    else:
        u2 = ComplexField(g, np.zeros(g.shape, dtype=complex))
        final = u2.data[-1]
    return Measurement(g, final, flux, None, input_id)


# ---------------------------------------------------------------------------
# data sources for the reconstruction pipelines


def probe_boundary_data(grid: SpaceTimeGrid, spec: ProbeSpec):
    """(phi, f) of the pure-phase forward probe for a spec."""
    car = spec.carrier()
    phi = car.phase_slice(grid, 0.0)
    f = BoundaryTrace(grid, {face: car.phase_face(grid, face)
                             for face in grid.faces()})
    return phi, f


class DirectQSource:
    """Serves Lambda_q records computed straight from the linear solve."""

    mode = "direct"

    def __init__(self, q: Potential):
        self.q = q

    def linearized(self, spec: ProbeSpec) -> Measurement:
        phi, f = probe_boundary_data(self.q.grid, spec)
        return lambda_q(self.q, phi, f, input_id=spec.key(),
                        carrier=spec.carrier())


class ExtractedQSource:
    """Serves g1 records extracted from full nonlinear measurements.

    Runs the input-output map at (eps, 2*eps) per probe; the 2*eps solve
    is warm-started from the eps correction rescaled by the leading
    eps^2 law, which usually cuts it to a couple of sweeps.
    """

    mode = "extracted"

    def __init__(self, q: Potential, nl: NonlinearitySpec, eps: float = 1e-6,
                 picard_tol: float = 1e-7):
        self.q = q
        self.nl = nl
        self.eps = eps
        self.picard_tol = picard_tol

    def measure_pair(self, spec: ProbeSpec) -> tuple[Measurement, Measurement]:
        phi, f = probe_boundary_data(self.q.grid, spec)
        car = spec.carrier()
        m1 = apply_io_map(self.q, self.nl, phi, f, self.eps,
                          input_id=spec.key(), carrier=car,
                          picard_tol=self.picard_tol)
        m2 = apply_io_map(self.q, self.nl, phi, f, 2.0 * self.eps,
                          input_id=spec.key(), carrier=car,
                          picard_tol=self.picard_tol, seed=m1)
        return m1, m2

    def linearized(self, spec: ProbeSpec) -> Measurement:
        m1, m2 = self.measure_pair(spec)
        return extract_linearizations(m1, m2).g1


# ---------------------------------------------------------------------------
# serialization: JSON metadata + raw payload bundle


def save_measurement(path, meas: Measurement):
    arrays = {"final": meas.final}
    for face, arr in meas.flux.faces.items():
        arrays[f"flux_{face[0]}_{face[1]}"] = arr
    meta = {"eps": meas.eps, "input_id": meas.input_id}
    write_bundle(path, meas.grid, meta, arrays)


def load_measurement(path) -> Measurement:
    grid, meta, arrays = read_bundle(path)
    faces = {}
    for face in grid.faces():
        faces[face] = arrays[f"flux_{face[0]}_{face[1]}"]
    return Measurement(grid, arrays["final"], BoundaryTrace(grid, faces),
                       meta["eps"], meta["input_id"])
