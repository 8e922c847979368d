"""Train the offloading agent briefly and compare it with the fixed rules.

A deliberately short run (40 training episodes, 10 evaluation episodes) on
a small system, so it finishes in well under a minute. The learned policy
will not be converged; the point is to show the workflow. Use
``mecsim simulate`` or ``mecsim sweep`` for full-length experiments.

    python demos/train_and_compare.py
"""
from mecsim import AgentConfig, desk_profile
from mecsim import harness

sim = desk_profile(num_devices=4, num_edges=2, arrival_rate=12.0, num_episodes=40, eval_episodes=10)
agent = AgentConfig()
rows, _ = harness.run_point(sim, agent, ("QOCO", "LC", "FO", "RD"), seed=3, axis_value=sim.arrival_rate)

print(f"{'policy':6s} {'completed':>9s} {'energy J':>9s} {'delay':>6s} {'QoE':>6s}")
for r in rows:
    print(f"{r.policy:6s} {r.completed:9d} {r.energy_j:9.1f} {r.avg_delay_slots:6.2f} {r.avg_qoe:6.3f}")

print()
for c in harness.compare(rows):
    if c.improvement is None:
        continue
    flag = "  (worse)" if c.underperforms else ""
    print(f"QOCO vs {c.baseline:2s} on {c.metric:15s} {100 * c.improvement:+6.1f}%{flag}")
