# %% [markdown]
# Sample a Fourier-series measure, look at its roughness, and check the
# chain rule for a few integrands.

# %%
import numpy as np

from smcalc import (
    FIELDS,
    CoefficientProfile,
    FourierSM,
    RademacherSequence,
    holder_diagnostic,
    sample_path,
    uniform_partition,
    verify_chain_rule,
)
from smcalc.measure import TWO_PI

# %%
sm = FourierSM(CoefficientProfile([(1, 1024)]), RademacherSequence(seed=0))
mu = sample_path(sm, 2**16 + 1)
print("mu on [0, 2 pi]:", len(mu), "points, max |mu| =", np.abs(mu.values).max())

# %%
# roughness: slope of the largest increment against the lag
fit = holder_diagnostic(mu, 16)
print("Holder slope estimate:", round(fit.gamma_hat, 3))
for level, peak in fit.scale_table[::4]:
    print(f"  lag 2 pi / 2^{level:<2}  max increment {peak:.4f}")

# %%
# a smoother measure for the calculus checks
mu = sample_path(FourierSM(CoefficientProfile([(1, 8)]), RademacherSequence(3)), 2**12 + 1)
parts = [uniform_partition(TWO_PI, 2**l) for l in (8, 10, 12)]

for name, slope in [("quadratic", 0.0), ("bilinear", 1.0), ("sin-shift", 0.5)]:
    V = mu.with_values(slope * mu.times)
    check = verify_chain_rule(FIELDS[name], mu, V, parts)
    res = ", ".join(f"{r:.2e}" for _, r in check.residuals)
    print(f"{name:>10}, V = {slope} t: rhs {check.rhs:+.6f}, residuals by mesh [{res}]")
