"""A change in the number of modes is invisible to the linear kernel but not to a narrow Gaussian one."""
# %%
from kcp import KernelSpec, build_gram, solve_fixed_d
from kcp.simulate import gen_modes_mixture

x, truth = gen_modes_mixture(600, delta=0.999, seed=1)
a, b = truth.inner
print("true boundaries:", truth.to_list())
# same mean and variance on both sides of each boundary
print(f"outer mean/var {x[:a].mean():+.3f}/{x[:a].var():.3f}, middle mean/var {x[a:b].mean():+.3f}/{x[a:b].var():.3f}")

# %%
for spec in (KernelSpec("linear"), KernelSpec("gaussian", bandwidth=0.01)):
    tau = solve_fixed_d(build_gram(spec, x), 3, delta_n=1 / 600)
    print(f"{spec.family:8s} -> {tau.to_list()}")
