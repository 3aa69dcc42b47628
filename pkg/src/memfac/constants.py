"""Physical constants and unit conventions.

Energies are in meV, times in ps, rates in 1/ps.  Angular frequencies
(1/ps) convert to energies through multiplication by HBAR.
"""

# reduced Planck constant in meV*ps
HBAR = 0.6582119569

# Boltzmann constant in meV/K
KB = 0.08617333262
