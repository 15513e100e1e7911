# coding: utf-8

# # Potentials and the hypothesis checkers
#
# The interaction is a radial pair potential V. The workhorse is C |x|^-gamma. Its value at the
# origin cell is the exact cell average, so singular kernels are sampled without blowing up.

# In[1]:

import numpy as np

from hartree_lab import inverse_power, make_grid, regularize, sample_potential
from hartree_lab.potential import check_assumptions, gamma_windows

g = make_grid(3, 32, 8.0)
pot = sample_potential(inverse_power(1.0, 2.5), g)
print("origin cell value", pot.origin_value)


# For a pair of exponents (p1, p2) the checker splits V at radius a and decides whether the near
# part is in L^p2 and the far part in L^p1, then reports which theorem windows the pair fits.

# In[2]:

rep = check_assumptions(pot, p1=1.4, p2=1.1, alpha=2.0, a=1.0)
print("H1", rep.h1.passed, rep.h1.windows)
print("H2", rep.h2.passed)
print("H3 (repulsive)", rep.h3.passed, "A_alpha", rep.h3.best_A)


# Scanning gamma shows the windows: the Cauchy problem needs gamma < 3, wave operators and
# completeness need 2 < gamma < 3.

# In[3]:

gammas = np.round(np.arange(0.1, 3.0, 0.1), 10)
for name, span in gamma_windows(3, gammas).items():
    print(f"{name:15s} {span}")


# The angular regularization V_j smooths the kernel without destroying monotonicity.

# In[4]:

for j in (2, 4, 8):
    vj = regularize(inverse_power(1.0, 2.5), j, g)
    print(j, "origin value", round(vj.origin_value, 3), "C_j", round(vj.spec.C, 4))
