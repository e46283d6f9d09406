"""Localization error shrinks like 1/n; a short version of the consistency experiment."""
# %%
from kcp import KernelSpec
from kcp.simulate import ExperimentConfig, run_experiment

cfg = ExperimentConfig(generator={"name": "modes_mixture", "delta": 0.999}, n_grid=[200, 400, 800],
                       repetitions=20, kernel=KernelSpec("gaussian", bandwidth=0.01),
                       selection={"mode": "fixed_d", "d": 3, "delta_n": "1/n"}, master_seed=7)
result = run_experiment(cfg)
for row in result.summary()["per_n"]:
    print(f"n={row['n']:4d}  mean loss={row['mean']:.5f} +- {row['stderr']:.5f}")
print(f"log-log slope {result.slope:.2f}")
