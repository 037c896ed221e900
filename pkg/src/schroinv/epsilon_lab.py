"""Empirical studies of the small-amplitude expansion.

Three diagnostics validate the structural assumptions behind the
linearized measurements: the cubic scaling of the expansion residual
u(eps) - eps u1 - eps^2 u2, the contraction of the Picard iteration and
its eps-scaling, and the admissibility of a candidate cubic remainder
term (derivative growth bounds near xi = 0 plus flatness in t).
"""

from __future__ import annotations

import numpy as np

from .grid import BoundaryTrace, ComplexField, gradient_all, sup_t_l2
from .solver import (
    SOLVER_TOL,
    NonlinearitySpec,
    PicardDivergence,
    Potential,
    compute_u2,
    solve_linear,
    solve_nonlinear,
)


def expansion_residual_study(q: Potential, nl: NonlinearitySpec,
                             phi: np.ndarray, f: BoundaryTrace,
                             eps_list, picard_tol: float = 1e-9) -> dict:
    """Measure r(eps) = sup_t ||u(eps) - eps u1 - eps^2 u2||_L2 and fit
    the log-log slope over the eps list.

    The slope should sit near 3 when the quadratic term is active
    (cubic remainder law); eps values where the solve fails to converge
    are dropped and reported, and eps values where r(eps) sinks below
    100 * solver_tol are excluded from the fit (discretization floor).
    """
    g = q.grid
    u1 = solve_linear(q, phi, f)
    grad_u1 = gradient_all(u1).data
    if nl.b is not None:
        u2 = compute_u2(q, nl.b, u1, grad_u1=grad_u1)
    else:
        u2 = ComplexField(g, np.zeros(g.shape, dtype=complex))

    eps_used, residuals, failed = [], [], []
    for eps in eps_list:
        try:
            sol = solve_nonlinear(q, nl, phi, f, eps, picard_tol=picard_tol)
        except PicardDivergence:
            failed.append(float(eps))
            continue
        expansion = eps * u1.data + eps * eps * u2.data
        r = sup_t_l2(ComplexField(g, sol.field.data - expansion))
        eps_used.append(float(eps))
        residuals.append(float(r))

    floor = 100.0 * SOLVER_TOL
    fit_mask = [r >= floor for r in residuals]
    report = {
        "eps": eps_used,
        "residual": residuals,
        "failed_eps": failed,
        "floor": floor,
        "fit_eps": [e for e, keep in zip(eps_used, fit_mask) if keep],
        "slope": None,
        "intercept": None,
        "fit_residuals": None,
    }
    if sum(fit_mask) >= 2:
        x = np.log([e for e, keep in zip(eps_used, fit_mask) if keep])
        y = np.log([r for r, keep in zip(residuals, fit_mask) if keep])
        slope, intercept = np.polyfit(x, y, 1)
        report["slope"] = float(slope)
        report["intercept"] = float(intercept)
        report["fit_residuals"] = (y - (slope * x + intercept)).tolist()
    return report


def contraction_study(q: Potential, nl: NonlinearitySpec, phi: np.ndarray,
                      f: BoundaryTrace, eps: float,
                      picard_tol: float = 1e-12) -> dict:
    """Per-iteration increments of the Picard map and the ratio estimate.

    rho estimates the asymptotic contraction factor as the median of the
    last few increment ratios (the early sweeps mix transient orders);
    it should roughly halve when eps halves, since the contraction
    constant is linear in the source amplitude at leading order.
    Divergence (rho >= 1) is reported in the dictionary, never raised.
    """
    sol = solve_nonlinear(q, nl, phi, f, eps, picard_tol=picard_tol,
                          raise_on_fail=False)
    inc = [v for v in sol.report.increments if np.isfinite(v)]
    ratios = [inc[k + 1] / inc[k] for k in range(len(inc) - 1)
              if inc[k] > 0 and inc[k + 1] > 0]
    tail = ratios[-min(5, len(ratios)):]
    rho = float(np.median(tail)) if tail else 0.0
    return {
        "eps": float(eps),
        "iterations": sol.report.iterations,
        "converged": bool(sol.report.converged),
        "increments": [float(v) for v in sol.report.increments],
        "ratios": [float(r) for r in ratios],
        "rho": rho,
    }


def _fd_derivative(fn, xi: np.ndarray, alpha: tuple[int, ...],
                   step: float) -> np.ndarray:
    """Central finite difference of a vector field of xi, multi-index alpha."""
    if sum(alpha) == 0:
        return np.asarray(fn(xi), dtype=complex)
    axis = next(a for a, p in enumerate(alpha) if p > 0)
    lower = tuple(p - 1 if a == axis else p for a, p in enumerate(alpha))
    e = np.zeros_like(xi)
    e[axis] = step
    return (_fd_derivative(fn, xi + e, lower, step)
            - _fd_derivative(fn, xi - e, lower, step)) / (2.0 * step)


def check_remainder_admissibility(nl, n: int = 2, t_sample: float = 0.5,
                                  xi_scale: float | None = None,
                                  n_dirs: int = 6, seed: int = 0) -> dict:
    """Check that a remainder flux is admissibly cubic and flat in time.

    Accepts a NonlinearitySpec (its remainder part is tested) or a bare
    callable R(t, xi) -> vector.  Cubic admissibility: for every
    multi-index |alpha| <= 3, the ratio |d^alpha_xi R| / |xi|^(3-|alpha|)
    must stay bounded as |xi| -> 0; the constant C is fitted at the
    largest sampled radius and the smaller radii must not exceed it by
    more than 50%.  Flatness: sup_x |R(t, xi)| must decay faster than
    t^5 as t -> 0 (checked at t in {0.1, 0.05, 0.025}).
    """
    if isinstance(nl, NonlinearitySpec):
        def R(t, xi):
            return nl.remainder_point(t, xi)
    else:
        R = nl
    rng = np.random.default_rng(seed)
    if xi_scale is None:
        xi_scale = 1.0 / 32.0   # a typical mesh width

    def fn(xi):
        return np.asarray(R(t_sample, xi), dtype=complex)

    # all multi-indices with |alpha| <= 3 over n components
    alphas = []
    for total in range(4):
        stack = [()]
        for _ in range(n):
            stack = [s + (p,) for s in stack
                     for p in range(total - sum(s) + 1)]
        alphas += [a for a in stack if sum(a) == total]

    dirs = rng.normal(size=(n_dirs, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = [xi_scale, xi_scale / 2.0, xi_scale / 4.0]
    ratio_table = {}
    for alpha in alphas:
        per_radius = []
        for rad in radii:
            worst = 0.0
            for d in dirs:
                xi = rad * d
                step = 0.05 * rad
                val = _fd_derivative(fn, xi, alpha, step)
                worst = max(worst, float(np.linalg.norm(val))
                            / rad ** (3 - sum(alpha)))
            per_radius.append(worst)
        ratio_table[alpha] = per_radius
    C = max(v[0] for v in ratio_table.values())
    cubic_ok = all(max(v) <= max(1.5 * C, 10.0 * SOLVER_TOL)
                   for v in ratio_table.values())

    xi_flat = xi_scale * dirs[0]
    flat_times = [0.1, 0.05, 0.025]
    flat_vals = [float(np.max(np.abs(np.asarray(R(t, xi_flat)))))
                 for t in flat_times]
    flat_ratios = [v / t ** 5 for v, t in zip(flat_vals, flat_times)]
    flat_ok = all(flat_ratios[k + 1] <= flat_ratios[k] + 10.0 * SOLVER_TOL
                  for k in range(len(flat_ratios) - 1))

    return {
        "admissible": bool(cubic_ok and flat_ok),
        "cubic_ok": bool(cubic_ok),
        "flat_ok": bool(flat_ok),
        "C": float(C),
        "ratio_table": {"".join(map(str, a)): v
                        for a, v in ratio_table.items()},
        "flat_times": flat_times,
        "flat_ratios": flat_ratios,
    }
