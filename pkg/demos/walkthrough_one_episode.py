"""Walk through one short episode slot by slot.

Three devices, two edge nodes. A fixed rule routes every task (small tasks
stay local, larger ones alternate between the edge nodes), so the queueing
in the printed log is easy to follow.

    python demos/walkthrough_one_episode.py
"""
import numpy as np

from mecsim import World, desk_profile

cfg = desk_profile(num_devices=3, num_edges=2, slots_per_episode=15, arrival_rate=15.0, seed=7)
world = World(cfg)
world.reset()
print(f"p(task per device per slot) = {cfg.arrival_probability:.2f}, deadline = {cfg.deadline} slots\n")

flip = [0]


def rule(device, state):
    if state.task_size <= 3e6:
        return 0  # local
    flip[0] ^= 1
    return 1 + flip[0]  # edge 0 or edge 1


qoes = []
while not world.done:
    t = world.slot
    sizes = [world.pending_arrival(i) for i in range(cfg.num_devices)]
    rep = world.advance_slot(rule)
    shown = " ".join(f"{a.size / 1e6:4.1f}" if a else "   -" for a in sizes)
    loads = [e.load_history[-1] for e in world.edges]
    print(f"t={t:2d}  new tasks (Mbit) [{shown}]  active queues per edge {loads}")
    for r in rep.records:
        where = "edge" if r.offloaded else "local"
        print(f"        task {r.task_id:2d} {r.outcome:9s} {where:5s} delay {r.delay:2d}"
              f"  energy {r.energy:6.3f} J  QoE {r.qoe:+.3f}")
        qoes.append(r.qoe)

tot = world.totals
print(f"\narrived {tot.arrivals}, completed {tot.completed}, dropped {tot.dropped}, "
      f"still queued {tot.in_system()}")
print(f"mean QoE over finalized tasks: {np.mean(qoes):.3f}")
