# coding: utf-8

# # Morawetz monitoring
#
# For a repulsive potential the dilation D(t) = Im <u, xhat . grad u> can only grow, and the
# interaction integrand J(t) = -int rho xhat . (V * grad rho) is nonnegative. Integrating J over
# time stays below D(t2) - D(t1), which in turn is bounded by 2 |u|_2 sup |grad u|_2.

# In[1]:

import numpy as np

from hartree_lab import EvolveConfig, Field, inverse_power, make_grid, sample_potential, strang_evolve
from hartree_lab.observables import morawetz_check, propagation_check, window_search

g = make_grid(3, 32, 12.0)
pot = sample_potential(inverse_power(1.0, 2.5), g)
x, y, z = g.coords
u0 = Field(g, 0.8 * np.exp(-(x**2 + y**2 + z**2) / (2 * 1.5**2)))
tr = strang_evolve(u0, pot, EvolveConfig(dt=0.01, t_end=2.0, sample_stride=10, diagnostics_every=10))


# In[2]:

rep = morawetz_check(tr, pot, 0.0, 2.0)
print("integral of J   ", rep.lhs)
print("D(t2) - D(t1)   ", rep.rhs_boundary)
print("a-priori bound  ", rep.rhs_bound)
print("D at t2 for sigma = 2h, h, h/2:", rep.dilation_sigma_trend)
print("passed", rep.passed, " boundary mass fraction", rep.boundary_fraction)


# Mass leaves a ball no faster than the propagation estimate allows.

# In[3]:

pr = propagation_check(u0, tr, R=4.0)
for t, l, r in list(zip(pr.times, pr.lhs, pr.rhs))[::5]:
    print(f"t={t:4.2f}  outside mass {l:.4f} <= {r:.4f}")


# The internal norm integral and the window search: find the first window of length ell whose
# integral falls below eps.

# In[4]:

scan = window_search(tr, eps=0.0, ell=1.0, alpha=2.0, t1=1.0)
print("window integrals", scan.window_integrals)
