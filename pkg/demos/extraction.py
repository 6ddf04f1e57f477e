# %% [markdown]
# # Zeros of a single singular face
#
# A face with index +1 has corner magnitudes, edge angles and a curvature.
# The curved interpolant has a zero inside the face.  We locate it by homotopy
# and compare against a brute-force scan of |interpolant| on a lattice.

# %%
import numpy as np

from ims.extract import find_triangle_zero, solve_edge_edge, triangle_interpolant

omega = np.array([2.0, 2.5, 1.6])
Omega = 2 * np.pi - omega.sum()
absz = np.array([0.8, 0.5, 0.6])
b, res = find_triangle_zero(omega, Omega, absz)
print("zero at barycentric", np.round(b, 6), "residual %.1e" % res)

# %%
n = 400
i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
keep = i + j <= n
pts = np.stack([1 - (i[keep] + j[keep]) / n, i[keep] / n, j[keep] / n], axis=1)
vals = np.array([triangle_interpolant(p, omega, Omega, absz) for p in pts])
print("lattice minimum", np.round(pts[np.argmin(vals)], 4), "value %.2e" % vals.min())

# %% [markdown]
# Product faces of A x B use a bilinear form s (a t + b) + c t + d.

# %%
rng = np.random.default_rng(0)
s0, t0 = 0.3, 0.7
a, bb, c = rng.normal(size=3) + 1j * rng.normal(size=3)
d = -(s0 * (a * t0 + bb) + c * t0)
print("edge-edge roots", [(round(float(s), 12), round(float(t), 12)) for s, t in solve_edge_edge(a, bb, c, d)])
