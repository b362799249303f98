"""
Telling a discrete random measure from a diffuse one
=====================================================

A gamma process puts all of its mass on countably many atoms.  Lebesgue
measure has no atoms at all, yet on every window the two agree in their
first moment.  The moment tests separate them through the sequence
xi[i] = M_{i+1} / n!, which for the gamma process grows like i! and for
the diffuse measure is a point mass at zero.
"""

import numpy as np

from momentcone.correlation import discreteness_verdict
from momentcone.measures import OffDiagonalBox, Window
from momentcone.models import DeterministicDiffuse, Gamma
from momentcone.momentproblem import atom_at_zero_series, quadrature_from_moments
from momentcone.moments import MomentSource, xi_sequence

unit = Window((0.0,), (1.0,))
box = OffDiagonalBox.power(unit, 1)

# %% the two xi sequences
gamma = MomentSource.analytic(Gamma(1.0))
flat = MomentSource.analytic(DeterministicDiffuse(1.0))
for name, src in [("gamma", gamma), ("diffuse", flat)]:
    print(f"{name:8s} xi =", xi_sequence(src, box, 8).axis(0))

# %% reading off the representing measure of xi
# For the gamma process the quadrature nodes are the Gauss-Laguerre nodes:
# xi is the moment sequence of the weight density s * exp(-s) / s = exp(-s).
q = quadrature_from_moments(xi_sequence(gamma, box, 8).axis(0))
print("gamma nodes  ", np.round(q.nodes, 4))
print("gamma weights", np.round(q.weights, 4))

# %% is there mass at zero?
# Partial sums of the determinant-ratio series keep growing when there is no
# atom at the origin; for the diffuse measure the sequence is degenerate at once.
for name, src in [("gamma", gamma), ("diffuse", flat)]:
    rep = atom_at_zero_series(xi_sequence(src, box, 10).axis(0), 5)
    print(f"{name:8s} outcome={rep.outcome:8s} trend={rep.trend} partial sums={np.round(rep.partial_sums, 3)}")

# %% the full verdict over the default window ladder
for name, src in [("gamma", gamma), ("diffuse", flat)]:
    v = discreteness_verdict(src)
    print(f"{name:8s} -> {v.outcome}  {v.status_counts()}")
