"""Independent reference computations used to certify the pipelines.

Nothing here shares assembly code with the reconstruction paths: the
identity oracles integrate the interior products directly, and the
Fourier oracles evaluate closed-form transforms of the benchmark
coefficients.  Tests compare pipeline outputs against these.
"""

from __future__ import annotations

import numpy as np

from . import benchmarks
from .fourier import FourierSampleSet
from .grid import (
    BoundaryTrace,
    ComplexField,
    SpaceTimeGrid,
    VectorField,
    quadrature_spacetime,
)
from .solver import Potential


def manufactured_problem(q: Potential, u_star, du_dt, lap_u):
    """Data and source for a chosen closed-form solution u*.

    u_star, du_dt, lap_u are callables of (t, x_1..x_n) giving u*, its
    time derivative and its spatial Laplacian analytically.  Returns
    (phi, f, F) with F = i du/dt + Lap u + q u, so that u* solves the
    inhomogeneous problem with data (phi, f).
    """
    g = q.grid
    u = ComplexField.from_function(g, u_star)
    phi = u.data[0].copy()
    f = BoundaryTrace.from_field(u, with_final=False)
    mesh = g.spacetime_mesh()
    F = ComplexField(g, 1j * np.broadcast_to(np.asarray(du_dt(*mesh), dtype=complex), g.shape)
                     + np.broadcast_to(np.asarray(lap_u(*mesh), dtype=complex), g.shape)
                     + q.values * u.data)
    return phi, f, F


def interior_identity_quadrature(kind: str, *, q: Potential | None = None,
                                 b: VectorField | None = None,
                                 u1: ComplexField | None = None,
                                 v: ComplexField | None = None,
                                 grad_u1: np.ndarray | None = None,
                                 grad_v: np.ndarray | None = None) -> complex:
    """Direct trapezoidal quadrature of an identity's interior side.

    kind "q_identity": int over the cylinder of q * u1 * v.
    kind "b_identity": int of (b . grad v) |grad u1|^2.
    Gradients may be passed explicitly when the fields ride unresolvable
    carriers; otherwise they are formed by stencils.
    """
    if kind == "q_identity":
        if q is None or u1 is None or v is None:
            raise ValueError("q_identity needs q, u1 and v")
        return quadrature_spacetime(q.values * u1.data * v.data, q.grid)
    if kind == "b_identity":
        if b is None:
            raise ValueError("b_identity needs b")
        g = b.grid
        if grad_u1 is None:
            from .grid import gradient_all
            grad_u1 = gradient_all(u1).data
        if grad_v is None:
            from .grid import gradient_all
            grad_v = gradient_all(v).data
        sq = np.sum(grad_u1 * np.conj(grad_u1), axis=0).real
        integrand = np.sum(np.asarray(b.data) * grad_v, axis=0) * sq
        return quadrature_spacetime(integrand, g)
    raise ValueError(f"unknown identity kind {kind!r}")


def analytic_fourier(descriptor: str, grid: SpaceTimeGrid, j_max: int,
                     k_max: int, comp: int = 0) -> FourierSampleSet:
    """Exact windowed Fourier samples of a benchmark coefficient.

    descriptor: "q_bench", "b_bench" (select component via comp), or
    "zero".  The filled band is |j| <= j_max, |k|_inf <= k_max.
    """
    out = FourierSampleSet(grid, j_max, k_max)
    for idx in out.band_indices():
        j, kvec = idx[0], idx[1:]
        if descriptor == "q_bench":
            tau = out.tau_of(j)
            xi = out.xi_of(kvec)
            val = complex(benchmarks.q_bench_fourier(grid, tau, xi[np.newaxis, :])[0])
        elif descriptor == "b_bench":
            val = benchmarks.b_bench_fourier(grid, comp, j, kvec)
        elif descriptor == "zero":
            val = 0.0
        else:
            raise ValueError(f"unknown descriptor {descriptor!r}")
        out.set_sample(j, kvec, val)
    return out
