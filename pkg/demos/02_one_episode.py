"""
One episode, slot by slot
=========================

Walks a short episode of the scheduling environment under the 1-TDMA
schedule (sense, uplink, downlink for each user in turn) and prints what
happens in every slot: beam updates, deliveries, drops and the reward.
"""

import numpy as np

from beamslot.baselines import TdmaPolicy
from beamslot.env import BeamSlotEnv, EnvConfig, episode_metrics

cfg = EnvConfig(slots=18, deterministic_init=True)
env = BeamSlotEnv(cfg)
obs = env.reset(seed=1)
policy = TdmaPolicy(1, cfg.num_users)
rng = np.random.default_rng(1)

print("initial beams", [u.beam for u in env.users], "positions", [u.pose.position for u in env.users])
print("observation layout: beams/Mt | DL fill | UL fill | power, one column per user")
print(np.round(obs.reshape(4, -1), 3))

# %%
# The slot loop
# -------------
# Every step first moves the users and redraws fading, then applies the
# action, then lets new packets arrive, then scores the slot.

trace = []
done = False
while not done:
    action = policy.act(obs, env.k + 1, rng)
    obs, out, done = env.step(action)
    trace.append(out)
    note = []
    if out.sensing:
        note.append("beam changed" if out.beam_changed else "beam kept")
    if out.delivered:
        note.append("delivered")
    if out.bad_beam_drops:
        note.append("sent on a stale beam")
    if out.overflow_drops:
        note.append(f"{out.overflow_drops} overflow")
    print(f"slot {out.slot:2d} {str(action):5s} reward {out.reward:+.3f}  beams {out.beams}  {', '.join(note)}")

# %%
# Episode accounting
# ------------------
# Every packet generated is either delivered, lost, or still waiting.

m = episode_metrics(trace, env.generated, env.buffered())
print(f"generated {m.generated} = delivered {m.delivered} + lost {m.lost} + buffered {m.buffered}")
print(f"PER {m.per:.3f}, throughput {m.throughput:.3f} packets/slot, slots {m.slots}")
