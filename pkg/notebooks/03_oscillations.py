# %% [markdown]
# Two coefficient profiles built greedily so that variation functionals
# keep swinging instead of settling down.

# %%
import json

from smcalc import (
    construct_oscillator1,
    construct_oscillator2,
    f_of_eps,
    parseval_check,
    verify_oscillator1,
    verify_oscillator2,
)

# %%
for eps in (1.0, 0.5, 0.1):
    r = parseval_check(eps, 10**6)
    print(f"eps {eps}: partial {r.partial_sum:.9f} target {r.target:.9f} bound {r.tail_bound:.1e}")

# %%
cert = construct_oscillator1(3)
print("blocks:", cert.blocks)
full = cert.profile
for k, eps in enumerate(cert.eps_sequence, 1):
    value, _ = f_of_eps(full, eps, full.max_index)
    print(f"  f(eps_{k} = {eps:.3g}) = {value:.4f}")
print("independent re-check problems:", verify_oscillator1(cert))

# %%
cert2 = construct_oscillator2(2, seeds=100)
print("scale pairs (n_j, n~_j):", cert2.scale_pairs)
print("S at n_j:", [round(s, 3) for s in cert2.S_lower])
print("share of seeds with S at n~_j below 1:", cert2.fraction_below())
print("re-check problems:", verify_oscillator2(cert2))
print(json.dumps(cert2.to_dict()["blocks"]))
