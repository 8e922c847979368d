"""Experiment harness: train/evaluate policies over a sweep axis, write CSVs.

Each sweep point gets its own training world (seeded with ``seed``) and one
evaluation world (seeded with ``seed + EVAL_SEED_OFFSET``) that every policy
replays, so all policies see the same arrivals and battery draws.

Output layout of a sweep directory::

    metrics.csv            one row per (axis value, policy)
    <metric>.csv           wide table per metric, one column per policy
    manifest.json          schema version, axis, config, file list
    <metric>.svg           optional charts
    episodes.jsonl         per-episode records (verbose only)
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .agent.policies import BASELINES, LEARNED, POLICIES, make_policy
from .agent.runner import EpisodeMetrics, run_episode
from .config import AgentConfig, SimConfig, config_hash, dump_config
from .world import World

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ("axis_value", "policy", "completed", "energy_j", "avg_delay_slots", "avg_qoe",
               "episodes", "seed", "config_hash")
METRICS = ("completed", "energy_j", "avg_delay_slots", "avg_qoe")
AXES = ("arrival_rate", "num_devices")
ABSENT = "NA"
EVAL_SEED_OFFSET = 10_000

# orientation of each metric: +1 when larger is better
METRIC_SIGN = {"completed": 1, "energy_j": -1, "avg_delay_slots": -1, "avg_qoe": 1}


@dataclass(frozen=True)
class MetricsRow:
    """Evaluation aggregate of one policy at one sweep point.

    ``completed`` and ``energy_j`` are totals over the evaluation episodes;
    the averages pool every completed (delay) or finalized (QoE) task and are
    ``nan`` when that set is empty.
    """
    axis_value: float
    policy: str
    completed: int
    energy_j: float
    avg_delay_slots: float
    avg_qoe: float
    episodes: int
    seed: int
    config_hash: str

    def as_csv(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return ABSENT
        if x.is_integer() and abs(x) < 1e15:
            return str(int(x))
        return repr(x)
    return str(x)


def _parse(x: str) -> float:
    return float("nan") if x in (ABSENT, "") else float(x)


def point_config(base: SimConfig, axis: str, value: float) -> SimConfig:
    """Config of one sweep point.

    Sweeping ``num_devices`` keeps the per-device arrival probability fixed,
    so more devices means more load.
    """
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if axis == "arrival_rate":
        if value < 0:
            raise ValueError(f"arrival_rate must be >= 0, got {value}")
        return base.replace(arrival_rate=float(value))
    if value != int(value) or value < 1:
        raise ValueError(f"num_devices must be a positive integer, got {value}")
    n = int(value)
    rate = base.arrival_probability * n / base.slot_seconds
    return base.replace(num_devices=n, arrival_rate=rate)


def aggregate(episodes: list[EpisodeMetrics], axis_value: float, policy: str, seed: int,
              chash: str) -> MetricsRow:
    delays = [d for m in episodes for d in m.delays]
    qoes = [q for m in episodes for q in m.qoes]
    return MetricsRow(
        axis_value=axis_value,
        policy=policy,
        completed=int(sum(m.completed for m in episodes)),
        energy_j=float(sum(m.energy for m in episodes)),
        avg_delay_slots=float(np.mean(delays)) if delays else float("nan"),
        avg_qoe=float(np.mean(qoes)) if qoes else float("nan"),
        episodes=len(episodes),
        seed=seed,
        config_hash=chash,
    )


def episode_record(m: EpisodeMetrics, **keys) -> dict:
    """Per-episode log entry; sums are kept so aggregates can be recomputed."""
    rec = dict(keys, **m.summary())
    rec.update(delay_sum=int(sum(m.delays)), qoe_sum=float(sum(m.qoes)), qoe_count=len(m.qoes),
               loss_mean=float(np.mean(m.losses)) if m.losses else None)
    return rec


def aggregate_records(records: list[dict]) -> list[MetricsRow]:
    """Rebuild evaluation rows from ``episodes.jsonl`` records."""
    groups: dict[tuple, list[dict]] = {}
    for r in records:
        if r["mode"] == "eval":
            groups.setdefault((r["axis_value"], r["policy"], r["seed"], r["config_hash"]), []).append(r)
    rows = []
    for (value, policy, seed, chash), recs in groups.items():
        completed = sum(r["completed"] for r in recs)
        n_q = sum(r["qoe_count"] for r in recs)
        rows.append(MetricsRow(
            axis_value=value, policy=policy, completed=completed,
            energy_j=float(sum(r["energy_j"] for r in recs)),
            avg_delay_slots=sum(r["delay_sum"] for r in recs) / completed if completed else float("nan"),
            avg_qoe=sum(r["qoe_sum"] for r in recs) / n_q if n_q else float("nan"),
            episodes=len(recs), seed=seed, config_hash=chash))
    return rows


def train_learner(sim: SimConfig, agent_cfg: AgentConfig, seed: int, records: list | None = None,
                  keys: dict | None = None, progress_every: int = 0):
    """Train a fresh learning policy for ``sim.num_episodes`` episodes."""
    policy = make_policy(LEARNED, sim, agent_cfg, seed)
    world = World(sim, seed=seed)
    t0 = time.perf_counter()
    for ep in range(sim.num_episodes):
        m = run_episode(world, policy, "train", ep)
        if records is not None:
            records.append(episode_record(m, mode="train", policy=LEARNED, **(keys or {})))
        if progress_every and (ep % progress_every == 0 or ep == sim.num_episodes - 1):
            log.info("train ep %d eps=%.3f completed=%d qoe=%.3f (%.0fs)", ep, policy.epsilon,
                     m.completed, m.avg_qoe, time.perf_counter() - t0)
    return policy


def evaluate(policy, sim: SimConfig, seed: int, episodes: int) -> list[EpisodeMetrics]:
    world = World(sim, seed=seed + EVAL_SEED_OFFSET)
    return [run_episode(world, policy, "eval", ep) for ep in range(episodes)]


def run_point(sim: SimConfig, agent_cfg: AgentConfig, policies, seed: int, axis_value: float = float("nan"),
              verbose: bool = False, progress_every: int = 0) -> tuple[list[MetricsRow], list[dict]]:
    """Train (learning policy only) and evaluate every policy at one config."""
    policies = validate_policies(policies)
    chash = config_hash(sim, agent_cfg)
    records: list[dict] | None = [] if verbose else None
    keys = dict(axis_value=axis_value, seed=seed, config_hash=chash)
    rows = []
    for name in policies:
        if name == LEARNED:
            policy = train_learner(sim, agent_cfg, seed, records, keys, progress_every)
        else:
            policy = make_policy(name, sim, agent_cfg, seed)
        eps = evaluate(policy, sim, seed, sim.eval_episodes)
        if records is not None:
            records.extend(episode_record(m, mode="eval", policy=name, **keys) for m in eps)
        rows.append(aggregate(eps, axis_value, name, seed, chash))
    return rows, records or []


def validate_policies(policies) -> tuple[str, ...]:
    policies = tuple(policies)
    if not policies:
        raise ValueError("no policies given")
    bad = [p for p in policies if p not in POLICIES]
    if bad:
        raise ValueError(f"unknown policies {bad}; expected a subset of {POLICIES}")
    if len(set(policies)) != len(policies):
        raise ValueError(f"duplicate policies in {policies}")
    return policies


def _point_job(args):
    sim, agent_cfg, axis, value, policies, seed, verbose = args
    cfg = point_config(sim, axis, value)
    return run_point(cfg, agent_cfg, policies, seed, axis_value=value, verbose=verbose)


def run_sweep(sim: SimConfig, agent_cfg: AgentConfig, axis: str, values, policies=POLICIES,
              seed: int | None = None, out_dir: str | Path | None = None, workers: int = 1,
              charts: bool = False, verbose: bool = False) -> list[MetricsRow]:
    """Run every (value, policy) combination; write outputs when ``out_dir`` is given."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("no sweep values given")
    policies = validate_policies(policies)
    seed = sim.seed if seed is None else seed
    for v in values:
        point_config(sim, axis, v)  # reject bad values before any work starts
    jobs = [(sim, agent_cfg, axis, v, policies, seed, verbose) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_point_job, jobs))
    else:
        results = []
        for job in jobs:
            log.info("sweep point %s=%g", axis, job[3])
            results.append(_point_job(job))
    rows = [r for point_rows, _ in results for r in point_rows]
    records = [r for _, point_records in results for r in point_records]
    if out_dir is not None:
        write_outputs(Path(out_dir), rows, records, sim, agent_cfg, axis, values, policies, seed,
                      charts=charts, verbose=verbose)
    return rows


# ---------------------------------------------------------------------------
# files

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def rows_to_csv(rows: list[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def metric_table_csv(rows: list[MetricsRow], metric: str, policies) -> str:
    by_point: dict[float, dict[str, MetricsRow]] = {}
    for r in rows:
        by_point.setdefault(r.axis_value, {})[r.policy] = r
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis_value", *policies])
    for value, cols in by_point.items():
        w.writerow([_fmt(value)] + [_fmt(getattr(cols[p], metric)) if p in cols else ABSENT
                                    for p in policies])
    return buf.getvalue()


def write_csv(path: str | Path, rows: list[MetricsRow]) -> Path:
    path = Path(path)
    _atomic_write(path, rows_to_csv(rows))
    return path


def read_csv(path: str | Path) -> list[MetricsRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [MetricsRow(
            axis_value=_parse(r["axis_value"]), policy=r["policy"],
            completed=int(float(r["completed"])), energy_j=_parse(r["energy_j"]),
            avg_delay_slots=_parse(r["avg_delay_slots"]), avg_qoe=_parse(r["avg_qoe"]),
            episodes=int(r["episodes"]), seed=int(r["seed"]), config_hash=r["config_hash"],
        ) for r in reader]


def write_outputs(out: Path, rows, records, sim, agent_cfg, axis, values, policies, seed,
                  charts=False, verbose=False) -> dict:
    files = {"metrics": "metrics.csv"}
    write_csv(out / "metrics.csv", rows)
    for metric in METRICS:
        files[metric] = f"{metric}.csv"
        _atomic_write(out / files[metric], metric_table_csv(rows, metric, policies))
    if verbose:
        files["episodes"] = "episodes.jsonl"
        _atomic_write(out / "episodes.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    if charts:
        for metric in METRICS:
            files[f"{metric}_chart"] = f"{metric}.svg"
            plot_metric(rows, metric, axis, policies, out / f"{metric}.svg")
    manifest = dict(schema_version=SCHEMA_VERSION, columns=list(CSV_COLUMNS), axis=axis,
                    values=values, policies=list(policies), seed=seed,
                    config_hash=config_hash(sim, agent_cfg), config=dump_config(sim, agent_cfg),
                    eval_seed_offset=EVAL_SEED_OFFSET, files=files)
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def plot_metric(rows: list[MetricsRow], metric: str, axis: str, policies, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for p in policies:
        pts = sorted((r.axis_value, getattr(r, metric)) for r in rows if r.policy == p)
        if pts:
            ax.plot(*zip(*pts), marker="o", label=p)
    ax.set_xlabel(axis.replace("_", " "))
    ax.set_ylabel(metric.replace("_", " "))
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "mecsim"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# comparison report

def relative_improvement(learned: float, baseline: float, sign: int) -> float:
    """Signed relative gain of ``learned`` over ``baseline``; positive is better."""
    if math.isnan(learned) or math.isnan(baseline):
        return float("nan")
    if baseline == 0:
        return 0.0 if learned == baseline else math.copysign(math.inf, sign * (learned - baseline))
    return sign * (learned - baseline) / abs(baseline)


@dataclass(frozen=True)
class Comparison:
    axis_value: float
    baseline: str
    metric: str
    learned: float | None
    other: float | None
    improvement: float | None  # None when either side is absent
    underperforms: bool


def compare(rows: list[MetricsRow], learned: str = LEARNED, baselines=BASELINES) -> list[Comparison]:
    by_point: dict[float, dict[str, MetricsRow]] = {}
    for r in rows:
        by_point.setdefault(r.axis_value, {})[r.policy] = r
    out = []
    for value, cols in by_point.items():
        for base in baselines:
            for metric in METRICS:
                a = cols.get(learned)
                b = cols.get(base)
                va = None if a is None else float(getattr(a, metric))
                vb = None if b is None else float(getattr(b, metric))
                if va is None or vb is None or math.isnan(va) or math.isnan(vb):
                    out.append(Comparison(value, base, metric, va, vb, None, False))
                    continue
                imp = relative_improvement(va, vb, METRIC_SIGN[metric])
                out.append(Comparison(value, base, metric, va, vb, imp, imp < 0))
    return out


def summarize(paths, learned: str = LEARNED) -> str:
    """Text report of the learned policy's relative gain over each baseline."""
    rows = []
    for p in paths:
        p = Path(p)
        rows.extend(read_csv(p / "metrics.csv" if p.is_dir() else p))
    lines = ["axis_value  baseline  metric           learned      baseline     improvement"]
    flagged = 0
    for c in compare(rows, learned):
        la = ABSENT if c.learned is None else f"{c.learned:.4g}"
        lb = ABSENT if c.other is None else f"{c.other:.4g}"
        if c.improvement is None:
            imp = ABSENT
        else:
            imp = f"{100 * c.improvement:+.1f}%"
        mark = "  <-- underperforms" if c.underperforms else ""
        flagged += c.underperforms
        lines.append(f"{_fmt(c.axis_value):>10}  {c.baseline:<8}  {c.metric:<15}  {la:>11}  {lb:>11}  {imp:>11}{mark}")
    lines.append(f"{flagged} comparison(s) where {learned} underperforms")
    return "\n".join(lines) + "\n"


def rows_as_dicts(rows: list[MetricsRow]) -> list[dict]:
    return [asdict(r) for r in rows]
