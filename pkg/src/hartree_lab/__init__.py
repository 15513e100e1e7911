"""Pseudospectral solver and scattering diagnostics for the Hartree equation

    i u_t = -(1/2) Laplacian u + u (V * |u|^2)

on a periodic box, with radial pair potentials ``V``.
"""
from .grid import Field, GridSpec, make_grid
from .potential import (PotentialSpec, inverse_power, regularize, sample_potential, tabulated,
                        zero_potential)
from .propagator import EvolveConfig, Trajectory, free_propagate, picard_iterate, strang_evolve
from .observables import dilation_quantity, energy, hartree_term, mass, morawetz_check, morawetz_integrand
from .scattering import completeness_roundtrip, extract_asymptotic, interaction_picture, wave_operator

__version__ = "0.1.0"
