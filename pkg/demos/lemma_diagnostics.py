"""Track the linearised drift and variance against their log n predictions.

Run with ``python3 demos/lemma_diagnostics.py``.  Both ratios creep towards
their limits, but only logarithmically, which is why desk-scale runs sit
well below the asymptotic variance.
"""
import math

from laguerre_edge import a0_sum, build_geometry, clt_constants, edge_params, variance_sum
from laguerre_edge.diagnostics import lyapunov_ratio

print(f"{'n':>9} {'var/pred':>9} {'a0/pred':>9} {'lyapunov':>10} {'n^-1/4':>8}")
for n in [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6]:
    params = edge_params(n, 0.5, 1.0)
    geom = build_geometry(params)
    k = clt_constants(params)
    logn = math.log(n)
    var_ratio = variance_sum(geom) / (k.variance_constant * logn)
    a0_ratio = a0_sum(geom) / (k.a0_constant * logn)
    print(f"{n:>9} {var_ratio:>9.3f} {a0_ratio:>9.3f} {lyapunov_ratio(geom):>10.5f} {n ** -0.25:>8.4f}")
