"""
Verdicts from simulated data
============================

The analytic zoo uses exact moments.  Here the same engine runs on samples.
Tempered-stable weights have a heavy small-weight tail, so their samples are
truncated coarsely (trunc_eps = 1e-3) to keep atom counts manageable.
"""

from momentcone.correlation import point_process_verdict
from momentcone.measures import Window, window_ladder
from momentcone.models import (
    DeterministicDiffuse,
    FixedAtoms,
    Gamma,
    LevyIntensity,
    MarkedPoissonCRM,
    Mixture,
    PoissonPP,
    sample_many,
)
from momentcone.moments import MomentSource

window = Window((-1.0,), (1.0,))
ladder = window_ladder([0.5, 1.0])
shrink = window_ladder([0.5, 0.25])

cases = [
    ("gamma", Gamma(1.0), 1e-6),
    ("poisson", PoissonPP(1.0), 1e-6),
    ("fixed atoms", FixedAtoms(((0.3, 2.0), (-0.7, 0.5))), 1e-6),
    ("tempered stable", MarkedPoissonCRM(LevyIntensity.tempered_stable(1.0, 0.5, 1.0)), 1e-3),
]
for name, model, eps in cases:
    batch = sample_many(model, window, seed=4, count=4000, trunc_eps=eps)
    v = point_process_verdict(MomentSource.empirical(batch), ladder, shrink_ladder=shrink)
    print(f"{name:16s} -> {v.outcome:13s} {v.status_counts()}")

# %% diffuse parts cannot be sampled as atoms, so they are judged from exact moments
mix = Mixture((Gamma(1.0), DeterministicDiffuse(0.5)))
print("gamma + diffuse  ->", point_process_verdict(MomentSource.analytic(mix), ladder).outcome)
