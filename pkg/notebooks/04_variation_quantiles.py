# %% [markdown]
# Monte Carlo quantiles over sign draws: cubic variation shrinks with eps,
# while squared dyadic increments of a finite-mode measure shrink with level.

# %%
import numpy as np

from smcalc import (
    CoefficientProfile,
    FourierSM,
    RademacherSequence,
    boundedness_quantile,
    dyadic_partition,
    sample_path,
    strong_variation_estimate,
    sum_squared_increments,
)
from smcalc.measure import TWO_PI

prof = CoefficientProfile([(1, 64)])

# %%
paths = [sample_path(FourierSM(prof, RademacherSequence(s)), 2**14 + 1) for s in range(50)]
for eps in (0.1, 0.05, 0.01):
    q = boundedness_quantile(lambda s: strong_variation_estimate(paths[s], 3, eps, 6.0), 50, 0.95)
    print(f"cubic variation, eps {eps:<5} 95% quantile {q:.4f}")

# %%
# with 64 modes the dyadic sums are fixed numbers once 2^(n-1) > 64 and fall
# like 2 pi^2 * 64 / 2^n, so these quantiles do not stay flat across levels
for level in (6, 8, 10, 12):
    p = dyadic_partition(TWO_PI, level)
    q = boundedness_quantile(
        lambda s: sum_squared_increments(FourierSM(prof, RademacherSequence(s)), p), 100, 0.99
    )
    print(f"level {level:>2}: 99% quantile {q:.4f}   2 pi^2 64 / 2^level = {2 * np.pi**2 * 64 / 2**level:.4f}")
