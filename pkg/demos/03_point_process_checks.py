"""
Point processes: flat moments, positive definiteness and Wick pairings
=======================================================================

When every weight equals one, the weighted moments no longer depend on the
powers, so xi is constant.  The same lifted samples also feed the positive
definiteness check of the correlation family and the comparison of Wick
pairings with correlation integrals.
"""

import numpy as np

from momentcone.correlation import (
    correlation_family,
    flatness,
    generalized_correlation,
    mean_k_square,
    pd_check,
    point_process_verdict,
    random_s_functional,
)
from momentcone.measures import OffDiagonalBox, Window
from momentcone.models import Gamma, PoissonPP, sample_many
from momentcone.moments import MomentSource

two = Window((0.0,), (2.0,))
box = OffDiagonalBox.power(Window((0.0,), (1.0,)), 2)

# %% flatness separates unit weights from gamma weights
for name, model in [("poisson", PoissonPP(1.0)), ("gamma", Gamma(1.0))]:
    f = flatness(MomentSource.analytic(model), box)
    print(f"{name:8s} flat={f['flat']}  worst gap={f['statistic']:.3g}")
print("poisson verdict:", point_process_verdict(MomentSource.analytic(PoissonPP(1.0))).outcome)

# %% positive definiteness on random functionals
batch = sample_many(PoissonPP(1.0), two, seed=1, count=200)
family = correlation_family(batch, 4, two)
rng = np.random.default_rng(0)
for _ in range(5):
    g = random_s_functional(rng, two, 2)
    print(f"int G*G drho = {pd_check(family, g):9.5f}   mean (KG)^2 = {mean_k_square(batch, g, two):9.5f}")

# %% Wick pairings with disjoint supports
big = MomentSource.empirical(sample_many(PoissonPP(1.0), two, seed=2, count=4000))
phis = [lambda x: float(x[0] < 0.8), lambda x: 2.0 * float(x[0] >= 1.0)]
cmp = generalized_correlation(big, phis)
print(f"Wick mean {cmp.left:.4f}  correlation integral {cmp.right:.4f}  agree={cmp.agrees()}")
