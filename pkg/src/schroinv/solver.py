"""Crank-Nicolson solvers for the linear, source-driven, adjoint and
nonlinear Schrodinger initial-boundary value problems.

All solves share one engine.  A solve may carry a plane-wave *carrier*
e^{i(a t + k.x)}: the engine then steps the smooth envelope w with
u = e^{i(a t + k.x)} w, which keeps high-frequency probes representable
on desk-scale grids.  The gauged equation for w is

    i dw/dt + Lap w + 2i k.grad w + (q - a - |k|^2) w = e^{-iS} F,

an exact identity, so no modelling error is introduced.  Without a
carrier the engine reduces to plain Crank-Nicolson on u itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (
    BoundaryTrace,
    ComplexField,
    SpaceTimeGrid,
    VectorField,
    _face_index,
    gradient_all,
    norm_l2_space,
    sup_t_l2,
)

SOLVER_TOL = 1e-10
PICARD_TOL = 1e-10
MAX_ITER = 50
COMPAT_TOL = 1e-12


class SolverError(RuntimeError):
    pass


class PicardDivergence(SolverError):
    pass


# ---------------------------------------------------------------------------
# carriers


@dataclass(frozen=True)
class Carrier:
    """Plane-wave gauge e^{i(freq*t + wavevec.x)} factored out of a solve."""

    freq: float
    wavevec: tuple[float, ...]

    @classmethod
    def go_forward(cls, lam: float, omega) -> "Carrier":
        """Carrier of the forward probe e^{-i(lam^2 t + lam x.omega)}."""
        omega = np.asarray(omega, dtype=float)
        return cls(-lam * lam, tuple(-lam * omega))

    @classmethod
    def go_adjoint(cls, lam: float, omega) -> "Carrier":
        """Carrier of the adjoint probe e^{+i(lam^2 t + lam x.omega)}."""
        omega = np.asarray(omega, dtype=float)
        return cls(lam * lam, tuple(lam * omega))

    def conjugate(self) -> "Carrier":
        return Carrier(-self.freq, tuple(-k for k in self.wavevec))

    @property
    def shift(self) -> float:
        """Constant freq + |k|^2 absorbed by the gauged operator."""
        return self.freq + sum(k * k for k in self.wavevec)

    def phase_spacetime(self, grid: SpaceTimeGrid) -> np.ndarray:
        t, *xs = grid.spacetime_mesh()
        s = self.freq * t
        for kk, x in zip(self.wavevec, xs):
            s = s + kk * x
        return np.exp(1j * np.broadcast_to(s, grid.shape))

    def phase_slice(self, grid: SpaceTimeGrid, t: float) -> np.ndarray:
        xs = grid.space_mesh()
        s = np.zeros(grid.m)
        for kk, x in zip(self.wavevec, xs):
            s = s + kk * x
        return np.exp(1j * (self.freq * t + s))

    def phase_face(self, grid: SpaceTimeGrid, face) -> np.ndarray:
        axis, side = face
        coord = 0.0 if side == 0 else grid.box[axis]
        t = grid.times().reshape((-1,) + (1,) * (grid.n - 1))
        s = self.freq * t + self.wavevec[axis] * coord
        other = [k for k in range(grid.n) if k != axis]
        for j, k in enumerate(other):
            shape = [1] * (grid.n - 1)
            shape[j] = grid.m[k]
            s = s + self.wavevec[k] * grid.axis_coords(k).reshape(shape)
        return np.exp(1j * np.broadcast_to(s, (grid.nt + 1,) + grid.face_shape(face)))

    def gradient_of_carried(self, grid: SpaceTimeGrid, envelope: np.ndarray) -> np.ndarray:
        """grad(e^{iS} w) = e^{iS} (grad w + i k w), exact in the carrier."""
        env_field = ComplexField(grid, envelope)
        g = gradient_all(env_field).data
        k = np.asarray(self.wavevec)
        for axis in range(grid.n):
            g[axis] += 1j * k[axis] * envelope
        return g * self.phase_spacetime(grid)[np.newaxis]


def demodulate_trace(trace: BoundaryTrace, carrier: Carrier | None) -> dict:
    """Face arrays of the envelope trace e^{-iS} f."""
    if carrier is None:
        return {face: arr.copy() for face, arr in trace.faces.items()}
    g = trace.grid
    return {
        face: arr * np.conj(carrier.phase_face(g, face))
        for face, arr in trace.faces.items()
    }


# ---------------------------------------------------------------------------
# coefficients


@dataclass
class Potential:
    """Real-valued time-dependent electric potential sampled on the grid."""

    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("potential shape mismatch")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential contains non-finite values")

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "Potential":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> "Potential":
        mesh = grid.spacetime_mesh()
        vals = np.broadcast_to(np.asarray(fn(*mesh), dtype=float), grid.shape)
        return cls(grid, vals.copy())

    def as_field(self) -> ComplexField:
        return ComplexField(self.grid, self.values.astype(complex))


def _flat_time_factor(t):
    """exp(-1/t) for t > 0, 0 at t = 0; flat at t = 0 to all orders."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


@dataclass
class NonlinearitySpec:
    """Quadratic flux |grad u|^2 b plus an optional cubic flat remainder.

    remainder_kind "cubic_flat" is R(t,x,xi) = c * exp(-1/t) |xi|^2 xi,
    a concrete member of the admissible cubic class (flat at t=0).
    """

    b: VectorField | None = None
    remainder_kind: str = "none"
    remainder_scale: float = 1.0

    def __post_init__(self):
        if self.remainder_kind not in ("none", "cubic_flat"):
            raise ValueError(f"unknown remainder_kind {self.remainder_kind!r}")
        if self.b is not None and np.iscomplexobj(self.b.data) and \
                np.max(np.abs(self.b.data.imag)) > 0:
            raise ValueError("b must be real-valued")

    def is_trivial(self) -> bool:
        no_b = self.b is None or not np.any(self.b.data)
        no_r = self.remainder_kind == "none" or self.remainder_scale == 0.0
        return no_b and no_r

    def flux(self, grid: SpaceTimeGrid, grad_u: np.ndarray) -> np.ndarray:
        """J(t,x,grad u) with shape (n, nt+1, *m)."""
        sq = np.sum(grad_u * np.conj(grad_u), axis=0).real
        out = np.zeros_like(grad_u)
        if self.b is not None:
            out += sq[np.newaxis] * np.asarray(self.b.data, dtype=float)
        if self.remainder_kind == "cubic_flat" and self.remainder_scale != 0.0:
            mu = _flat_time_factor(grid.times()).reshape((-1,) + (1,) * grid.n)
            out += self.remainder_scale * mu[np.newaxis] * sq[np.newaxis] * grad_u
        return out

    def remainder_point(self, t: float, xi: np.ndarray) -> np.ndarray:
        """R(t, ., xi) for one complex direction vector xi."""
        xi = np.asarray(xi, dtype=complex)
        if self.remainder_kind != "cubic_flat" or self.remainder_scale == 0.0:
            return np.zeros_like(xi)
        mu = float(_flat_time_factor(np.asarray(t)))
        return self.remainder_scale * mu * float(np.sum(xi * np.conj(xi)).real) * xi


# ---------------------------------------------------------------------------
# the Crank-Nicolson engine


def _interior_operator(grid: SpaceTimeGrid, carrier: Carrier | None):
    """Sparse interior-interior part of Lap + 2i k.grad - shift."""
    sizes = [mm - 2 for mm in grid.m]
    kvec = np.zeros(grid.n) if carrier is None else np.asarray(carrier.wavevec)
    shift = 0.0 if carrier is None else carrier.shift
    L = None
    for axis in range(grid.n):
        h = grid.h[axis]
        d2 = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1],
                      shape=(sizes[axis], sizes[axis])).astype(complex) / h**2
        d1 = sp.diags([-1.0, 1.0], [-1, 1],
                      shape=(sizes[axis], sizes[axis])).astype(complex) / (2.0 * h)
        term = None
        for ax2 in range(grid.n):
            blk = (d2 + 2j * kvec[axis] * d1) if ax2 == axis else sp.identity(sizes[ax2])
            term = blk if term is None else sp.kron(term, blk, format="csr")
        L = term if L is None else L + term
    L = L.astype(complex) - shift * sp.identity(int(np.prod(sizes)), dtype=complex)
    return L.tocsr()


def _apply_operator_full(sl: np.ndarray, q_sl: np.ndarray, grid: SpaceTimeGrid,
                         kvec: np.ndarray, shift: float) -> np.ndarray:
    """(Lap + 2i k.grad + q - shift) sl on interior nodes, 0 on boundary.

    Uses the boundary values of sl, which is how Dirichlet data couples in.
    """
    core = grid.interior_slices()
    acc = (q_sl[core] - shift) * sl[core]
    for axis in range(grid.n):
        lo = list(core)
        hi = list(core)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        lo, hi = tuple(lo), tuple(hi)
        h = grid.h[axis]
        acc = acc + (sl[lo] - 2.0 * sl[core] + sl[hi]) / h**2
        if kvec[axis] != 0.0:
            acc = acc + 2j * kvec[axis] * (sl[hi] - sl[lo]) / (2.0 * h)
    out = np.zeros_like(sl, dtype=complex)
    out[core] = acc
    return out


class CrankNicolsonStepper:
    """Reusable CN time stepper for one (grid, q, carrier) triple.

    One LU factorization (reference potential frozen at its time mean) is
    shared by every step; the time variation of q is restored by an inner
    fixed-point correction whose contraction factor is O(dt * osc(q)).
    Steps that fail to contract fall back to a direct factorization.
    """

    def __init__(self, q: Potential, carrier: Carrier | None = None,
                 solver_tol: float = SOLVER_TOL):
        self.grid = q.grid
        self.q = q
        self.carrier = carrier
        self.solver_tol = solver_tol
        g = self.grid
        self.kvec = np.zeros(g.n) if carrier is None else np.asarray(carrier.wavevec)
        self.shift = 0.0 if carrier is None else carrier.shift
        core = g.interior_slices()
        # q at half time levels
        self.q_half = 0.5 * (q.values[:-1] + q.values[1:])
        self._q_half_int = self.q_half[(slice(None),) + core].reshape(g.nt, -1)
        q_ref = self._q_half_int.mean(axis=0)
        self._dq = self._q_half_int - q_ref[np.newaxis]
        n_int = self._q_half_int.shape[1]
        L0 = _interior_operator(g, carrier)
        idt = 1j / g.dt
        M_plus = idt * sp.identity(n_int, dtype=complex, format="csr") \
            + 0.5 * (L0 + sp.diags(q_ref.astype(complex)))
        self._lu = spla.splu(M_plus.tocsc())
        self._L0 = L0
        self._q_ref = q_ref
        self._core = core
        self._n_int = n_int
        self._direct_lus: dict[int, object] = {}

    # -- single implicit solve ------------------------------------------------

    def _solve_step(self, k: int, rhs_flat: np.ndarray) -> np.ndarray:
        dq = self._dq[k]
        x = self._lu.solve(rhs_flat)
        if not np.any(dq):
            return x
        scale = float(np.linalg.norm(rhs_flat)) or 1.0
        tol = 0.01 * self.solver_tol * scale
        for _ in range(60):
            x_new = self._lu.solve(rhs_flat - 0.5 * dq * x)
            err = float(np.linalg.norm(x_new - x))
            x = x_new
            if err <= tol:
                return x
        # stiff potential variation: factor this step directly
        if k not in self._direct_lus:
            g = self.grid
            M = (1j / g.dt) * sp.identity(self._n_int, dtype=complex, format="csr") \
                + 0.5 * (self._L0 + sp.diags(self._q_half_int[k].astype(complex)))
            self._direct_lus[k] = spla.splu(M.tocsc())
        return self._direct_lus[k].solve(rhs_flat)

    # -- full sweep ------------------------------------------------------------

    def sweep(self, phi_env: np.ndarray,
              trace_env_faces: dict | None = None,
              source_env: np.ndarray | None = None) -> np.ndarray:
        """March the envelope through all time steps.

        phi_env: (*m) initial envelope (boundary values included).
        trace_env_faces: face -> (nt+1, *face_shape) Dirichlet envelope data.
        source_env: (nt+1, *m) envelope source, averaged to half levels.
        Returns the full envelope array (nt+1, *m).
        """
        g = self.grid
        core = self._core
        out = np.zeros(g.shape, dtype=complex)
        out[0] = phi_env
        idt = 1j / g.dt
        bnd_next = np.zeros(g.m, dtype=complex)
        for k in range(g.nt):
            q_sl = self.q_half[k]
            cur = out[k]
            rhs = idt * cur[core] - 0.5 * _apply_operator_full(
                cur, q_sl, g, self.kvec, self.shift)[core]
            if trace_env_faces is not None:
                bnd_next[:] = 0.0
                for face, vals in trace_env_faces.items():
                    bnd_next[_face_index(g, face)] = vals[k + 1]
                rhs = rhs - 0.5 * _apply_operator_full(
                    bnd_next, q_sl, g, self.kvec, self.shift)[core]
            if source_env is not None:
                rhs = rhs + 0.5 * (source_env[k] + source_env[k + 1])[core]
            sol = self._solve_step(k, rhs.ravel())
            nxt = out[k + 1]
            if trace_env_faces is not None:
                for face, vals in trace_env_faces.items():
                    nxt[_face_index(g, face)] = vals[k + 1]
            nxt[core] = sol.reshape(tuple(mm - 2 for mm in g.m))
        if not np.all(np.isfinite(out.view(float))):
            raise SolverError("time stepping produced non-finite values")
        return out

    def cn_residual(self, env: np.ndarray,
                    source_env: np.ndarray | None = None) -> float:
        """Max over steps of the interior L^2 CN residual of an envelope."""
        g = self.grid
        core = self._core
        worst = 0.0
        for k in range(g.nt):
            r = 1j * (env[k + 1] - env[k])[core] / g.dt
            r = r + 0.5 * (_apply_operator_full(env[k], self.q_half[k], g,
                                                self.kvec, self.shift)
                           + _apply_operator_full(env[k + 1], self.q_half[k], g,
                                                  self.kvec, self.shift))[core]
            if source_env is not None:
                r = r - 0.5 * (source_env[k] + source_env[k + 1])[core]
            full = np.zeros(g.m, dtype=complex)
            full[core] = r
            worst = max(worst, norm_l2_space(full, g))
        return worst


_STEPPER_CACHE: dict = {}


def get_stepper(q: Potential, carrier: Carrier | None = None) -> CrankNicolsonStepper:
    """Memoized stepper lookup (keyed on potential identity and carrier)."""
    key = (id(q), carrier)
    st = _STEPPER_CACHE.get(key)
    if st is None or st.q is not q:
        st = CrankNicolsonStepper(q, carrier)
        _STEPPER_CACHE[key] = st
    return st


def clear_stepper_cache():
    _STEPPER_CACHE.clear()


def prune_stepper_cache(keep_ungauged: bool = True):
    """Drop carrier-specific steppers (each holds an LU factorization).

    Pipelines that sweep over many probe directions would otherwise
    accumulate one factorization per direction.  The ungauged stepper is
    kept by default since source solves reuse it across probes.
    """
    for key in list(_STEPPER_CACHE):
        if not (keep_ungauged and key[1] is None):
            del _STEPPER_CACHE[key]


# ---------------------------------------------------------------------------
# public solves


def _check_compatibility(grid, phi, f: BoundaryTrace, scale=None):
    worst = 0.0
    for face in grid.faces():
        idx = _face_index(grid, face)
        worst = max(worst, float(np.max(np.abs(phi[idx] - f.faces[face][0]))))
    ref = scale if scale is not None else max(1.0, float(np.max(np.abs(phi))),
                                              f.max_abs())
    if worst > COMPAT_TOL * ref:
        raise SolverError(
            f"initial/boundary data incompatible at t=0: mismatch {worst:.3e}")


def solve_linear(q: Potential, phi: np.ndarray, f: BoundaryTrace,
                 carrier: Carrier | None = None,
                 stepper: CrankNicolsonStepper | None = None) -> ComplexField:
    """Solve i u_t + Lap u + q u = 0, u(0)=phi, u|Sigma=f.

    The returned field satisfies the (gauged, if a carrier is given) CN
    residual bound with Dirichlet values set from f exactly.
    """
    g = q.grid
    phi = np.asarray(phi, dtype=complex)
    _check_compatibility(g, phi, f)
    st = stepper or get_stepper(q, carrier)
    if carrier is None:
        env = st.sweep(phi, f.faces)
        return ComplexField(g, env)
    phi_env = phi * np.conj(carrier.phase_slice(g, 0.0))
    env = st.sweep(phi_env, demodulate_trace(f, carrier))
    return ComplexField(g, env * carrier.phase_spacetime(g))


def solve_linear_envelope(q: Potential, phi: np.ndarray, f: BoundaryTrace,
                          carrier: Carrier,
                          stepper: CrankNicolsonStepper | None = None) -> np.ndarray:
    """Like solve_linear but returns the envelope w with u = e^{iS} w."""
    g = q.grid
    phi = np.asarray(phi, dtype=complex)
    _check_compatibility(g, phi, f)
    st = stepper or get_stepper(q, carrier)
    phi_env = phi * np.conj(carrier.phase_slice(g, 0.0))
    return st.sweep(phi_env, demodulate_trace(f, carrier))


def solve_source(q: Potential, F: ComplexField,
                 carrier: Carrier | None = None,
                 stepper: CrankNicolsonStepper | None = None,
                 check_compatibility: bool = True) -> ComplexField:
    """Solve i u_t + Lap u + q u = F with zero initial and boundary data.

    check_compatibility enforces F(0,.) = 0 (the compatible case); pass
    False for sources with a small initial transient, e.g. probe
    remainder equations driven by a potential that is merely tiny, not
    zero, at t = 0.
    """
    g = q.grid
    f0 = float(np.max(np.abs(F.data[0])))
    scale = float(np.max(np.abs(F.data))) or 1.0
    if check_compatibility and f0 > 1e-12 * scale:
        raise SolverError(f"source does not vanish at t=0 (max {f0:.3e})")
    st = stepper or get_stepper(q, carrier)
    if carrier is None:
        src = F.data
    else:
        src = F.data * np.conj(carrier.phase_spacetime(g))
    env = st.sweep(np.zeros(g.m, dtype=complex), None, src)
    if carrier is None:
        return ComplexField(g, env)
    return ComplexField(g, env * carrier.phase_spacetime(g))


def solve_adjoint(q: Potential, phi: np.ndarray, f: BoundaryTrace,
                  carrier: Carrier | None = None,
                  stepper: CrankNicolsonStepper | None = None) -> ComplexField:
    """Solve -i v_t + Lap v + q v = 0 by conjugating the forward problem.

    `carrier`, if given, is the carrier of v itself; q must be real (it is,
    by type).  Returns v = conj(solve_linear(q, conj(phi), conj(f))).
    """
    conj_faces = {face: np.conj(arr) for face, arr in f.faces.items()}
    conj_trace = BoundaryTrace(q.grid, conj_faces,
                               None if f.final is None else np.conj(f.final))
    cc = None if carrier is None else carrier.conjugate()
    u = solve_linear(q, np.conj(np.asarray(phi, dtype=complex)), conj_trace,
                     carrier=cc, stepper=stepper)
    return ComplexField(q.grid, np.conj(u.data))


def adjoint_source_envelope(q: Potential, F: ComplexField, carrier: Carrier | None,
                            stepper: CrankNicolsonStepper | None = None,
                            check_compatibility: bool = True) -> ComplexField:
    """Solve -i v_t + Lap v + q v = F with zero data (conjugation trick)."""
    cc = None if carrier is None else carrier.conjugate()
    u = solve_source(q, ComplexField(q.grid, np.conj(F.data)), carrier=cc,
                     stepper=stepper, check_compatibility=check_compatibility)
    return ComplexField(q.grid, np.conj(u.data))


def divergence_of_flux(grid: SpaceTimeGrid, J: np.ndarray) -> ComplexField:
    """div J by the same second-order stencils used everywhere else."""
    out = np.zeros(grid.shape, dtype=complex)
    for axis in range(grid.n):
        out += np.gradient(J[axis], grid.h[axis], axis=1 + axis, edge_order=2)
    return ComplexField(grid, out)


def compute_u2(q: Potential, b: VectorField, u1: ComplexField,
               grad_u1: np.ndarray | None = None,
               stepper: CrankNicolsonStepper | None = None) -> ComplexField:
    """Second-order expansion term: source div(|grad u1|^2 b), zero data.

    grad_u1 may be supplied when u1 rides a carrier (stencil gradients of
    an oscillatory field would alias); otherwise stencils are used.
    """
    g = q.grid
    if grad_u1 is None:
        grad_u1 = gradient_all(u1).data
    sq = np.sum(grad_u1 * np.conj(grad_u1), axis=0).real
    J = sq[np.newaxis] * np.asarray(b.data, dtype=float)
    F = divergence_of_flux(g, J)
    return solve_source(q, F, stepper=stepper)


# ---------------------------------------------------------------------------
# nonlinear solve


@dataclass
class PicardReport:
    iterations: int
    increments: list[float] = dc_field(default_factory=list)
    converged: bool = False
    residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "increments": list(self.increments),
            "converged": self.converged,
            "residual": self.residual,
        }


@dataclass
class NonlinearSolution:
    """Converged Picard iterate u = e^{iS} w + r (r is carrier-free)."""

    grid: SpaceTimeGrid
    carrier: Carrier | None
    carried_envelope: np.ndarray
    residual_part: np.ndarray
    report: PicardReport

    @property
    def field(self) -> ComplexField:
        if self.carrier is None:
            return ComplexField(self.grid, self.carried_envelope + self.residual_part)
        phase = self.carrier.phase_spacetime(self.grid)
        return ComplexField(self.grid, phase * self.carried_envelope + self.residual_part)

    def gradient(self) -> np.ndarray:
        """Spatial gradient (n, nt+1, *m), carrier handled analytically."""
        if self.carrier is None:
            g = gradient_all(ComplexField(self.grid, self.carried_envelope)).data
        else:
            g = self.carrier.gradient_of_carried(self.grid, self.carried_envelope)
        if np.any(self.residual_part):
            g = g + gradient_all(ComplexField(self.grid, self.residual_part)).data
        return g


def solve_nonlinear(q: Potential, nl: NonlinearitySpec, phi: np.ndarray,
                    f: BoundaryTrace, eps: float,
                    carrier: Carrier | None = None,
                    picard_tol: float = PICARD_TOL, max_iter: int = MAX_ITER,
                    raise_on_fail: bool = True,
                    compute_residual: bool = False,
                    r_init: np.ndarray | None = None,
                    lin_env: np.ndarray | None = None) -> NonlinearSolution:
    """Picard iteration for i u_t + Lap u + q u = div J(t,x,grad u)
    with data (eps*phi, eps*f).

    The first iterate is the linear solve; each subsequent one re-solves
    with the source evaluated on the previous iterate.  Stops when the
    sup-in-time L^2 increment drops below picard_tol relative to the
    linear part's magnitude.  r_init seeds the correction iterate (e.g.
    a solution at a nearby eps rescaled by the leading eps^2 law), which
    typically saves several sweeps.  lin_env supplies the linear part's
    envelope when it is already known (e.g. rescaled from a solve of the
    same data at another eps), skipping that sweep too.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = q.grid
    st_lin = get_stepper(q, carrier)
    st_src = get_stepper(q, None) if carrier is not None else st_lin

    phi_s = eps * np.asarray(phi, dtype=complex)
    f_s = eps * f
    if lin_env is not None:
        w = np.asarray(lin_env, dtype=complex)
    elif carrier is None:
        w = solve_linear(q, phi_s, f_s, stepper=st_lin).data
    else:
        w = solve_linear_envelope(q, phi_s, f_s, carrier, stepper=st_lin)
    base = NonlinearSolution(g, carrier, w, np.zeros(g.shape, dtype=complex),
                             PicardReport(0))
    grad_lin = base.gradient()
    lin_scale = max(sup_t_l2(base.field), 1e-300)

    report = PicardReport(0)
    r = np.zeros(g.shape, dtype=complex)
    if nl.is_trivial():
        report.iterations = 1
        report.increments = [0.0]
        report.converged = True
        if compute_residual:
            report.residual = 0.0
        return NonlinearSolution(g, carrier, w, r, report)

    grad_r = np.zeros((g.n,) + g.shape, dtype=complex)
    if r_init is not None:
        r = np.asarray(r_init, dtype=complex).copy()
        grad_r = gradient_all(ComplexField(g, r)).data
    last_F = None
    for j in range(1, max_iter + 1):
        J = nl.flux(g, grad_lin + grad_r)
        F = divergence_of_flux(g, J)
        try:
            r_new = solve_source(q, F, stepper=st_src).data
        except SolverError:
            # iterate blew up past floating-point range: clearly divergent
            report.iterations = j
            report.increments.append(float("inf"))
            break
        inc = sup_t_l2(ComplexField(g, r_new - r))
        report.increments.append(inc)
        report.iterations = j
        r = r_new
        grad_r = gradient_all(ComplexField(g, r)).data
        last_F = F
        if inc <= picard_tol * lin_scale:
            report.converged = True
            break
        if len(report.increments) >= 3 and inc > 2.0 * report.increments[0]:
            break  # clearly diverging; eps beyond the smallness threshold
    if not report.converged and raise_on_fail:
        raise PicardDivergence(
            f"Picard iteration did not converge in {report.iterations} steps "
            f"(last increment {report.increments[-1]:.3e}); eps too large?")
    if compute_residual and last_F is not None:
        report.residual = st_src.cn_residual(r, last_F.data)
    return NonlinearSolution(g, carrier, w, r, report)
