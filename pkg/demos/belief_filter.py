"""
A voxel belief, one scan at a time
==================================

Each voxel keeps a log-odds value. A scan contributes the mean logit of the
points that landed in the voxel, and the value is a running sum of those
means, clamped to +-8.
"""

# %%
import numpy as np

from mosbelief import BeliefMap, logodds_to_prob

belief = BeliefMap(voxel_size=0.25)
voxel = np.array([[0.1, 0.1, 0.1]])

# %%
# Three points in one voxel: the measurement is their mean, not their sum.
updates = belief.aggregate(np.repeat(voxel, 3, axis=0), [2.0, -1.0, 0.5])
print([(tuple(u.index), u.mean_logit, u.contributing_points) for u in updates])
belief.update(updates)
print("log-odds", belief.value((0, 0, 0)), "p =", round(logodds_to_prob(belief.value((0, 0, 0))), 3))

# %%
# A stream of mostly-negative evidence with one confident false positive.
for logit in [-1.5, -2.0, 6.0, -1.0, -2.5]:
    belief.integrate(voxel, [logit])
    print(f"logit {logit:+.1f} -> log-odds {belief.value((0, 0, 0)):+.2f}, label {belief.query(voxel)[0]}")

# %%
# Long runs of evidence saturate at the clamp, so a voxel that was wrong for a
# while can still be turned around in a bounded number of scans.
for _ in range(10):
    belief.integrate(voxel, [3.0])
print("saturated at", belief.value((0, 0, 0)))
scans_to_flip = 0
while belief.query(voxel)[0] == 1:
    belief.integrate(voxel, [-3.0])
    scans_to_flip += 1
print("scans of -3 evidence to flip back to static:", scans_to_flip)

# %%
# The decision threshold is strict: exactly 0.5 stays static.
edge = BeliefMap(logodds_clamp=None)
edge.set_value((0, 0, 0), 0.0)
edge.set_value((1, 0, 0), 1e-9)
print(edge.query(np.array([[0.1, 0.1, 0.1], [0.3, 0.1, 0.1]])))
