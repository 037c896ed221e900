"""Small-amplitude expansion study.

Verifies numerically that u(eps) = eps*u1 + eps^2*u2 + O(eps^3) by
measuring the sup-t L2 residual of the two-term expansion across a
ladder of amplitudes, and reports the Picard contraction factor at
each amplitude.

Run:  python3 demos/02_epsilon_expansion.py
"""

import numpy as np

from schroinv import benchmarks
from schroinv.epsilon_lab import (
    check_remainder_admissibility,
    contraction_study,
    expansion_residual_study,
)
from schroinv.grid import BoundaryTrace, SpaceTimeGrid
from schroinv.solver import NonlinearitySpec

grid = SpaceTimeGrid((17, 17), 32)
q = benchmarks.q_bench(grid)
nl = NonlinearitySpec(b=benchmarks.b_bench(grid), remainder_kind="cubic_flat")

xs = grid.space_mesh()
phi = np.ones(grid.m, dtype=complex)
for x, box in zip(xs, grid.box):
    phi = phi * np.sin(np.pi * x / box)
f = BoundaryTrace.zeros(grid)

adm = check_remainder_admissibility(nl)
print(f"remainder admissible (|R| <= C|xi|^3 with flat-in-t factor): "
      f"{adm['admissible']}, C = {adm['C']:.3f}")

eps_ladder = [0.2, 0.1, 0.05, 0.025]
rep = expansion_residual_study(q, nl, phi, f, eps_ladder)
print("\n eps      ||u - eps u1 - eps^2 u2||   residual/eps^3")
for e, r in zip(rep["eps"], rep["residual"]):
    print(f" {e:<8g} {r:<26.3e} {r / e**3:.3f}")
print(f"log-log slope: {rep['slope']:.3f}  (cubic remainder -> 3)")

print("\nPicard contraction factor vs amplitude:")
for e in eps_ladder:
    c = contraction_study(q, nl, phi, f, e)
    print(f"  eps = {e:<6g} rho = {c['rho']:.4f}  "
          f"({c['iterations']} iterations)")
