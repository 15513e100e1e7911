# coding: utf-8

# # Grids, fields and the free flow
#
# Everything lives on a periodic box [-L, L)^n sampled with N points per axis. The origin sits at
# index N/2, so radial objects are centred on a grid point.

# In[1]:

import numpy as np

from hartree_lab import Field, make_grid, free_propagate
from hartree_lab.grid import exponents, gradient_l2, lp_norm

g = make_grid(3, 48, 12.0)
print(g, "h =", g.h)


# A field is just a grid plus complex samples and a time stamp. Norms are Riemann sums, gradients
# are spectral.

# In[2]:

x, y, z = g.coords
u0 = Field(g, np.exp(-(x**2 + y**2 + z**2) / 2))
print("mass", lp_norm(u0, 2) ** 2, "expected", np.pi**1.5)
print("grad", gradient_l2(u0) ** 2, "expected", 1.5 * np.pi**1.5)


# The free flow U(t) = exp(i t Laplacian / 2) is a Fourier multiplier, so it is exact up to
# aliasing. A Gaussian spreads and its L^r norms decay like t^-delta(r).

# In[3]:

for t in (0.0, 1.0, 2.0, 4.0):
    ut = free_propagate(u0, t)
    print(f"t={t:3.1f}  |u|_2={lp_norm(ut, 2):.6f}  |u|_6={lp_norm(ut, 6):.4f}")

print("delta(6) =", exponents(3, 6).delta, " so |u(t)|_6 ~ t^-1 for large t")
