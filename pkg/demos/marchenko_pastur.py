"""Compare the bulk spectrum of one sample with the Marchenko-Pastur law.

Run with ``python3 demos/marchenko_pastur.py``.
"""
import numpy as np
from scipy import stats

from laguerre_edge import edge_params, mp_cdf, sample_bidiagonal
from laguerre_edge.logdet import eigenvalues_scaled

params = edge_params(2000, 0.5, 1.0)
sample = sample_bidiagonal(params, master_seed=7, replica_index=0)
eig = eigenvalues_scaled(sample, params)

print(f"support [{params.d_minus:.4f}, {params.d_plus:.4f}]")
print(f"sample  [{eig[0]:.4f}, {eig[-1]:.4f}]")
print(f"shift gamma = {params.gamma:.4f} lies {params.gamma - eig[-1]:.4f} above the top eigenvalue")

ks = stats.kstest(eig, lambda x: mp_cdf(x, params.lam)).statistic
print(f"KS distance to Marchenko-Pastur {ks:.4f}")

# Histogram against the density integrated over each bin.
edges = np.linspace(params.d_minus, params.d_plus, 9)
counts, _ = np.histogram(eig, edges)
expected = np.diff(mp_cdf(edges, params.lam)) * eig.size
for lo, hi, c, e in zip(edges[:-1], edges[1:], counts, expected):
    print(f"  [{lo:.3f}, {hi:.3f})  observed {c:4d}  expected {e:7.1f}")
