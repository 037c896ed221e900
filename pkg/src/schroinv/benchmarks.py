"""Benchmark coefficient fields with closed-form Fourier transforms.

Two standard targets are used throughout the tests and pipelines:

* ``q_bench`` — a Gaussian bump centered in the space-time cylinder,
* ``b_bench`` — a real vector field built from low trigonometric modes,
  vanishing on the whole boundary of the cylinder (including t=0, which
  makes the second-order source compatible) and pointing in a direction
  that varies over the domain.

Both have analytically known windowed Fourier transforms, so the
inversion half of each reconstruction pipeline can be certified without
touching the PDE solvers.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .grid import SpaceTimeGrid, VectorField
from .solver import Potential

Q_CENTER_T = 0.5
Q_SIGMA_T = 0.15
Q_SIGMA_X = 0.12


def q_bench(grid: SpaceTimeGrid) -> Potential:
    """Gaussian bump exp(-(t-T/2)^2/(2 s_t^2) - |x-x_c|^2/(2 s_x^2))."""

    def fn(t, *xs):
        arg = -((t - Q_CENTER_T * grid.T) ** 2) / (2 * Q_SIGMA_T**2)
        for k, x in enumerate(xs):
            arg = arg - (x - 0.5 * grid.box[k]) ** 2 / (2 * Q_SIGMA_X**2)
        return np.exp(arg)

    return Potential.from_function(grid, fn)


def _gauss_window_transform(center: float, sigma: float, length: float,
                            omega) -> np.ndarray:
    """int_0^L exp(-(s-c)^2/(2 sigma^2)) e^{i omega s} ds, closed form.

    Completing the square gives a Gaussian factor times a difference of
    error functions with complex argument.
    """
    omega = np.asarray(omega, dtype=float)
    z0 = center + 1j * sigma**2 * omega
    pref = np.exp(1j * omega * center - 0.5 * sigma**2 * omega**2)
    root2 = np.sqrt(2.0)
    return (pref * sigma * np.sqrt(np.pi / 2.0)
            * (erf((length - z0) / (sigma * root2)) + erf(z0 / (sigma * root2))))


def q_bench_fourier(grid: SpaceTimeGrid, tau, xi) -> np.ndarray:
    """Exact windowed transform int over (0,T)xOmega of q_bench e^{i(tau t + xi.x)}.

    tau is scalar or array; xi has shape (..., n) broadcasting against tau.
    """
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    out = _gauss_window_transform(Q_CENTER_T * grid.T, Q_SIGMA_T, grid.T, tau)
    for k in range(grid.n):
        out = out * _gauss_window_transform(0.5 * grid.box[k], Q_SIGMA_X,
                                            grid.box[k], xi[..., k])
    return out


# ---------------------------------------------------------------------------
# b benchmark: exactly band-limited trigonometric polynomial


B_AMPLITUDES = (0.8, -0.5)


def b_bench(grid: SpaceTimeGrid) -> VectorField:
    """Low-mode real vector field vanishing on the cylinder boundary.

    Component 1: 0.8 sin^2(pi t/T) sin^2(pi x1) sin^2(pi x2) ...
    Component 2: -0.5 sin^2(pi t/T) sin^2(pi x1) sin^2(2 pi x2) ...
    (remaining components, if n > 2, reuse the component-2 profile with
    alternating sign), so the direction b/|b| varies over Omega.
    Being a trigonometric polynomial, its periodic Fourier series is
    finite: |temporal mode| <= 1, |spatial mode| <= 2.
    """
    if grid.n < 2:
        raise ValueError("b_bench needs n >= 2")

    def sin2(s, period):
        return np.sin(np.pi * s / period) ** 2

    def comp1(t, *xs):
        out = B_AMPLITUDES[0] * sin2(t, grid.T)
        for k, x in enumerate(xs):
            out = out * sin2(x, grid.box[k])
        return out

    def comp_other(sign):
        def fn(t, *xs):
            out = sign * B_AMPLITUDES[1] * sin2(t, grid.T)
            for k, x in enumerate(xs):
                if k == 1:
                    out = out * np.sin(2 * np.pi * x / grid.box[k]) ** 2
                else:
                    out = out * sin2(x, grid.box[k])
            return out
        return fn

    fns = [comp1] + [comp_other((-1.0) ** j) for j in range(grid.n - 1)]
    return VectorField.from_functions(grid, fns, dtype=float)


def _sin2_mode(j: int, double: bool = False) -> complex:
    """Fourier coefficient int_0^1 sin^2(p pi s) e^{2 pi i j s} ds, p=1 or 2."""
    peak = 2 if double else 1
    if j == 0:
        return 0.5
    if abs(j) == peak:
        return -0.25
    return 0.0


def b_bench_fourier(grid: SpaceTimeGrid, comp: int, j: int,
                    kvec: tuple[int, ...]) -> complex:
    """Exact transform int b_bench[comp] e^{i(tau_j t + xi_k.x)} for lattice
    frequencies tau_j = 2 pi j / T, xi_k = 2 pi kvec / box."""
    scale = grid.T * float(np.prod(grid.box))  # substitution to unit cube
    val = _sin2_mode(j)
    for axis, kk in enumerate(kvec):
        double = comp >= 1 and axis == 1
        val *= _sin2_mode(kk, double=double)
    amp = B_AMPLITUDES[0] if comp == 0 else (-1.0) ** (comp - 1) * B_AMPLITUDES[1]
    return amp * scale * val
