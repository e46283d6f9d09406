"""Distances between two segmentations of the same 19 points."""
# %%
from kcp.metrics import all_losses, check_lemma1, check_prop1, overlap_counts

t1, t2 = [0, 8, 17, 19], [0, 7, 14, 19]
for name, value in all_losses(t1, t2).items():
    print(f"{name:18s} {value}")

# %% the Frobenius distance only needs the overlap counts of the segments
print(overlap_counts(t1, t2))

# %% close segmentations: the losses agree and bracket the Frobenius distance
near = ([0, 40, 100], [0, 42, 100])
print(check_lemma1(*near).details)
print(check_prop1(*near))
