"""
Comparing the baseline schedulers
=================================

Runs random allocation and the three TDMA variants over the same seeded
episodes and prints the comparison table plus a coarse PER ECDF. Fewer
sensing slots leave more room for data but let beams go stale, which is
visible as a wider spread of episode PER for 6-TDMA.
"""

import numpy as np

from beamslot import harness
from beamslot.env import EnvConfig

cfg = harness.RunConfig(env=EnvConfig(slots=500), test_episodes=60, seed=2024)
results = [harness.evaluate(name, cfg) for name in harness.BASELINES]
rows = harness.summarize(results)
print(harness.summary_text(rows))

# %%
# Empirical CDF of episode PER
# ----------------------------
# Read off the fraction of episodes whose PER stays under a few thresholds.

grid = (0.3, 0.4, 0.5, 0.6)
print("PER <=    " + "  ".join(f"{g:5.2f}" for g in grid))
for res in results:
    pts = res.ecdf()
    xs = np.array([x for x, _ in pts])
    fs = np.array([f for _, f in pts])
    at = [fs[xs <= g][-1] if np.any(xs <= g) else 0.0 for g in grid]
    print(f"{res.policy:8s}  " + "  ".join(f"{a:5.2f}" for a in at))
