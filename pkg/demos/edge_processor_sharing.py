"""One edge node splitting its CPU among device queues.

Three devices hand a task each to the same edge node, one slot apart, each big enough to need several slots.
Each slot the capacity is divided equally among the queues that are
active, so the first task runs at full speed until company arrives and
then slows down. The printout shows each queue's share and the energy
each task is charged.

    python demos/edge_processor_sharing.py
"""
from mecsim import desk_profile
from mecsim.edge import EdgeNode
from mecsim.tasks import Task

cfg = desk_profile(num_devices=3, num_edges=1, deadline=10)
edge = EdgeNode(0, cfg)
cap = float(cfg.edge_cycles_per_slot)
print(f"edge capacity {cap / 1e9:.2f} Gcycles per slot\n")

size, density = 4 * max(cfg.task_sizes), max(cfg.densities)  # about 2.6 slots alone
arrivals = {1: 0, 2: 1, 3: 2}  # slot -> device
entries = {}
for t in range(1, 12):
    if t in arrivals:
        i = arrivals[t]
        task = Task(id=i, device=i, birth_slot=t, size=size, density=density, deadline_slot=t + cfg.deadline - 1)
        entries[i] = edge.enqueue(task, t)
    events = edge.step(t)
    log = edge.log[-1]
    shares = "  ".join(f"q{i}: {float(c) / cap:4.2f}" for i, c in sorted(log.served_cycles.items()))
    print(f"t={t:2d} active {sorted(log.active)}  fraction of capacity used  {shares}")
    for ev in events:
        e = ev.entry
        print(f"      task {e.task.id} {ev.outcome} (started {e.start_slot}, "
              f"{float(e.service_slots):.2f} slot-shares, edge energy {e.edge_energy:.3f} J)")
    if all(e.outcome for e in entries.values()) and len(entries) == len(arrivals):
        break
