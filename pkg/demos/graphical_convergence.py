"""Uniform convergence on a compact set, measured by Hausdorff distances.

T_n = identity + 1/n. On K = [1, 2] the image of the inflated set
K + eps B under T_n sits within eps + 1/n of T(K) = K.

    python3 demos/graphical_convergence.py
"""

import numpy as np

from tailot import MultiMapGraph, graphical_convergence_diagnostic

xs = (np.arange(-128, 513) / 128).reshape(-1, 1)
K = xs[(xs[:, 0] >= 1) & (xs[:, 0] <= 2)]
ns = [2, 4, 8, 16, 32]
graphs = [MultiMapGraph(xs, xs + 1 / n) for n in ns]
table = graphical_convergence_diagnostic(graphs, MultiMapGraph(xs, xs), K, [0.5, 0.25, 0.125, 0.0625], labels=ns)
print(table.to_csv())
for n in ns:
    print(f"n={n:>2}: smallest eps passing is {table.pass_eps.get(n)}")
