"""Find jumps in the mean of a noisy step signal with an automatically calibrated penalty."""
# %%
import numpy as np

from kcp import KernelSpec, PenaltySpec, build_gram, calibrate, select_penalized, solve_all_d
from kcp.simulate import gen_piecewise_mean

x, truth = gen_piecewise_mean(1, 500, seed=3)
print("true boundaries:", truth.to_list())

# %% minimal risk for every number of segments up to 30
gram = build_gram(KernelSpec("gaussian", bandwidth=0.1), x)
profile = solve_all_d(gram, 30)
for d in (1, 3, 5, 7, 10, 30):
    print(f"D={d:2d}  risk={profile.risk(d):.4f}")

# %% the constant C is read off the largest drop of the selected dimension
cal = calibrate(profile, gram.max_diag, gram.n)
print(f"largest drop at C={cal.c_jump:.3f}, using C={cal.c_selected:.3f}")
steps = np.flatnonzero(np.diff(cal.dims))
print("D_hat(C) changes at", [(round(float(cal.c_grid[i + 1]), 3), int(cal.dims[i + 1])) for i in steps])

# %%
est = select_penalized(profile, PenaltySpec(cal.c_selected, gram.max_diag), gram.n)
print("estimated boundaries:", est.to_list())
