"""Randomized checks of the deterministic inequalities behind the consistency argument."""
# %%
import numpy as np

from kcp.oracle import (MeanSignal, NoiseSample, check_kolmogorov, decomposition_terms, jump_stats,
                        run_battery)

mu = MeanSignal.from_levels([[0.0], [2.0], [-1.0]], [0, 30, 70, 100])
print("smallest/largest jump, shortest/longest segment:", jump_stats(mu))
noise = NoiseSample.gaussian(100, 1, 1.0, np.random.default_rng(0))
print(decomposition_terms(mu, noise, mu.true_tau))

# %%
for name, summary in run_battery(instances=300, seed=1).items():
    print(f"{name:16s} instances={summary.instances} violations={summary.violations} "
          f"worst slack={summary.worst_slack:.3g}")

# %% the partial-sum tail bound, by Monte Carlo
for x in (15.0, 30.0, 60.0):
    print(check_kolmogorov(100, x, 20_000, np.random.default_rng(2)))
