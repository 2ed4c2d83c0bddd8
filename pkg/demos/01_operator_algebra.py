"""Second-quantization operator algebra on a truncated boson basis.

Walks through the elementary constructions: a weighted mode grid, the
occupation basis, ladder/field operators and the functor maps, verifying a
few of their exact identities along the way.
"""

import numpy as np

from nelsonlab import fock

# A 4-mode symmetric midpoint grid on [-1, 1] with infrared scale 0.2.
grid = fock.line_grid(4, kmax=1.0, sigma=0.2)
print("modes:", grid.points.ravel())
print("weights:", grid.weights)
print("modified dispersion:", np.round(grid.omega_mod, 4))

# All occupation states with at most three bosons: binomial(4+3, 3) = 35.
basis = fock.build_basis(grid, n_max=3)
print(f"\nbasis size: {basis.size}")
print("first rows of the basis dump:")
print("\n".join(basis.to_csv().splitlines()[:5]))

# Smeared ladder operators and the canonical commutator.  Identities that
# create a boson hold exactly on the guarded sector N <= n_max - 1.
rng = np.random.default_rng(1)
g = rng.normal(size=4) + 1j * rng.normal(size=4)
h = rng.normal(size=4) + 1j * rng.normal(size=4)
a_g = fock.annihilation_op(basis, g)
c_h = fock.creation_op(basis, h)
guard = fock.guarded_projector(basis)
ccr = ((a_g @ c_h) - (c_h @ a_g)
       - fock.weighted_inner(grid, g, h) * fock.identity_op(basis)) @ guard
print(f"\nCCR defect on the guarded sector: {abs(ccr.dense()).max():.2e}")

# The multiplicative functor intertwines creation operators: Gb a*(h) = a*(bh) Gb.
b = rng.normal(size=(4, 4))
Gb = fock.Gamma(basis, b)
lhs = (Gb @ c_h) @ guard
rhs = (fock.creation_op(basis, b @ h) @ Gb) @ guard
print(f"Gamma intertwining defect: {abs((lhs - rhs).dense()).max():.2e}")

# The additive functor recovers the number operator from the identity.
N = fock.dGamma(basis, np.ones(4))
print(f"dGamma(1) = N defect: {abs((N - fock.number_op(basis)).dense()).max():.1e}")

# Field operators are exactly Hermitian and have vanishing vacuum mean.
phi = fock.field_op(basis, h)
vac = fock.FockVector.vacuum(basis).amps
print(f"phi Hermitian defect: {phi.hermiticity_defect():.1e}, "
      f"vacuum mean: {abs(np.vdot(vac, phi.mat @ vac)):.1e}")
