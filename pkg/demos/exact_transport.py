"""Solve a small transport problem exactly, then read a convex potential off it.

    python3 demos/exact_transport.py
"""

import numpy as np

from tailot import (
    MultiMapGraph,
    brute_force_assignment,
    dual_potentials,
    make_discrete,
    potential_from_duals,
    rockafellar_potential,
    solve_exact,
    subdiff_eval,
    transport_cost,
    verify_cyclic_monotonicity,
)

rng = np.random.default_rng(0)

# Two clouds of six points in the plane with unequal weights.
mu = make_discrete(rng.uniform(-2, 2, (6, 2)), rng.dirichlet(np.ones(6)))
nu = make_discrete(rng.uniform(-2, 2, (6, 2)) + [1.0, 0.0], rng.dirichlet(np.ones(6)))

pi = solve_exact(mu, nu)
print(f"optimal cost {transport_cost(pi):.6f} on {len(pi)} support pairs")
print(pi.to_csv())

# Every cycle of length <= 4 on the support is checked, since it is small.
check = verify_cyclic_monotonicity(pi, max_cycle_len=4)
print(f"cyclic monotonicity: {check.label} ({check.cycles_checked} cycles)")

# With equal weights the plan is a permutation, so brute force is a fair referee.
a = make_discrete(rng.normal(size=(6, 2)), np.full(6, 1 / 6))
b = make_discrete(rng.normal(size=(6, 2)), np.full(6, 1 / 6))
print(f"assignment: simplex {transport_cost(solve_exact(a, b)):.12f}, "
      f"brute force {transport_cost(brute_force_assignment(a, b)):.12f}")

# Two routes to a convex potential whose subdifferential contains the support:
# the dual solution of the LP, and the longest-path construction on the graph.
psi_dual = potential_from_duals(nu.points, dual_potentials(mu, nu, pi))
psi_graph = rockafellar_potential(MultiMapGraph(pi.x, pi.y))
for x, y in zip(pi.x, pi.y):
    hit = any(np.allclose(s, y) for s in subdiff_eval(psi_dual, x, tol=1e-9))
    print(f"x={np.round(x, 3)} -> y={np.round(y, 3)}  in dual subgradient: {hit}")
print(psi_graph)

# A swapped pair on the line cannot come from a convex potential.
try:
    rockafellar_potential(MultiMapGraph([[0.0], [1.0]], [[1.0], [0.0]]))
except ValueError as exc:
    print(f"swapped pair rejected: {exc}")
