"""Print the deterministic per-index tables near the upper edge.

Run with ``python3 demos/geometry_table.py``.  omega_i climbs towards 1 as
i approaches n, and the amplification g_i = 1 + omega_i g_{i+1} peaks a
short distance below the edge, where it is of order 1/(1 - omega_i).
"""
import numpy as np

from laguerre_edge import build_geometry, edge_params
from laguerre_edge.geometry import omega_asymptote, omega_regime

params = edge_params(100_000, 0.5, 1.0)
geom = build_geometry(params)
n = params.n

print(f"{'i':>8} {'|rho+|':>14} {'omega':>10} {'predicted':>10} {'regime':>6} {'g':>10}")
for i in [3, n // 2, n - n // 10, n - 5000, n - 500, n - 50, n]:
    g = geom.g[i]
    print(f"{i:>8} {geom.rho_plus[i]:>14.4f} {geom.omega[i]:>10.6f} "
          f"{omega_asymptote(i, params):>10.6f} {omega_regime(i, params):>6} {g:>10.3f}")

# Vieta: the product of the two roots equals B_i exactly.
i = np.arange(2, n + 1)
b = (params.m - n + i - 1.0) * (i - 1.0)
rel = np.abs(geom.rho_plus[i] * geom.rho_minus[i] - b) / b
print(f"max relative Vieta error {rel.max():.2e}")
print(f"max g                    {np.nanmax(geom.g[3:n + 1]):.3f}")
