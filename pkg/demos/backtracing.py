"""
Relabeling a missed mover after the fact
========================================

A box walks out from behind a wall. The scan prediction misses it for five
scans; afterwards the map prediction recognises its trace. The delayed
belief answers those five scans late enough to get them right.
"""

# %%
import numpy as np

from mosbelief import Engine, EngineConfig, FusionStrategy, MovingLabel, PredictionOutput
from mosbelief.synthetic import Box, SyntheticScene, generate_scene

scene = SyntheticScene(
    static_boxes=[Box((6.0, -2.0, 1.5), (1.0, 4.0, 3.0)), Box((16.0, 0.0, 2.5), (1.0, 30.0, 5.0))],
    actors=[Box((10.0, -2.4, 1.05), (1.0, 1.0, 1.5), (0.0, 2.0, 0.0))],
    duration=4.0,
)
frames = list(generate_scene(scene))
labels = {f.scan_index: f.labels for f in frames}
first = next(f.scan_index for f in frames if (f.labels == MovingLabel.MOVING).any())
print("mover first visible in scan", first)

# %%
def truth(cloud):
    out = np.zeros(len(cloud), dtype=bool)
    for idx in np.unique(cloud.scan_indices).tolist():
        rows = cloud.scan_indices == idx
        out[rows] = labels[idx][cloud.ordinals[rows]] == MovingLabel.MOVING
    return out


def predictor(inp):
    scan_index = int(inp.scan_points.scan_indices[0])
    moving = truth(inp.scan_points) & (not first <= scan_index < first + 5)
    map_moving = truth(inp.map_points) if scan_index >= first + 5 else np.zeros(len(inp.map_points), bool)
    return PredictionOutput(np.where(moving, 6.0, -6.0), np.where(map_moving, 6.0, -6.0))


# %%
strategies = (FusionStrategy.SCAN_ONLY, FusionStrategy.VOLUME_NO_DELAY, FusionStrategy.VOLUME_DELAYED)
engine = Engine(predictor, EngineConfig(strategies=strategies))
decided = {s: {} for s in strategies}
for f in frames:
    for strategy, d in engine.process_scan(f.scan, f.pose).decisions.items():
        if d is not None:
            decided[strategy][d.scan_index] = d.labels

for idx in range(first, first + 5):
    mover = labels[idx] == MovingLabel.MOVING
    row = "  ".join(f"{s.value}: {np.mean(decided[s][idx][mover] == 1):4.0%}" for s in strategies)
    print(f"scan {idx}: {row}")
