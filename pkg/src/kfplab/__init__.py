"""Numerical laboratory for a model kinetic Fokker-Planck equation.

The package solves u_t - v.D_x u - a^{ij}(t) D_{v_i v_j} u + lambda u = f
exactly in Fourier variables on periodic desk-scale grids and provides the
surrounding toolbox: kinetic quasi-distance geometry, Muckenhoupt weights,
weighted mixed norms, kinetic maximal and sharp functions, fractional
Laplacians, coefficient oscillation functionals, and empirical checks of
the a-priori Sobolev estimates satisfied by the solutions.
"""

__version__ = "0.1.0"
