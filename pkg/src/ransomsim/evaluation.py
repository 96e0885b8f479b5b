"""Frozen-policy evaluation: rollouts, summary statistics, and path exports.

A trained policy is evaluated by rolling complete episodes without any
learning.  Each episode yields a :class:`Trajectory`; collections of
trajectories reduce to an :class:`AggregateReport` (mean and sample
standard deviation of the headline metrics, plus per-host encryption
frequencies) from which rankings and side-by-side experiment comparisons
are derived.  Trajectories export to CSV (fixed six-column layout) or
JSON (full fidelity) and parse back.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nets
from .environment import RansomwareEnv
from .scenario import ScenarioConfig, scenario_hash

Address = Tuple[int, int]

PATH_CSV_HEADER = ["step", "action", "target", "success", "reward", "clock_s"]

METRICS = ("reward", "steps", "compromised", "encrypted")


@dataclass(frozen=True)
class TrajectoryStep:
    index: int
    kind: str
    target: Address
    success: bool
    reward: float
    clock: float


@dataclass
class Trajectory:
    """One complete episode under a frozen policy.

    ``totals`` is always the recomputation of :func:`totals_from_steps`
    over ``steps``; the constructor enforces this so the two can never
    drift apart.  ``flagged`` counts encrypt attempts that a defense
    stopped (honeyfile traps in all but rare mid-action corner cases).
    """

    steps: List[TrajectoryStep]
    terminal_reason: str = ""
    totals: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        recomputed = totals_from_steps(self.steps)
        if self.totals and self.totals != recomputed:
            raise ValueError("trajectory totals disagree with steps")
        self.totals = recomputed


def totals_from_steps(steps: Sequence[TrajectoryStep]) -> Dict[str, float]:
    """Headline totals as a pure function of the step list.

    The first step of an episode always targets the entry host (nothing
    else is actionable yet), so the compromised set is that host plus
    every successful exploit target.
    """
    reward = 0.0
    encrypted = 0
    flagged = 0
    compromised = set()
    for i, s in enumerate(steps):
        reward += s.reward
        if i == 0:
            compromised.add(s.target)
        if s.kind == "encrypt":
            if s.success:
                encrypted += 1
            else:
                flagged += 1
        elif s.kind == "exploit" and s.success:
            compromised.add(s.target)
    return {
        "reward": reward,
        "steps": len(steps),
        "compromised": len(compromised),
        "encrypted": encrypted,
        "flagged": flagged,
    }


# -- rollouts ----------------------------------------------------------------


def rollout_policy(
    scenario: ScenarioConfig,
    params: nets.PolicyParams,
    n: int,
    mode: str = "sample",
    seed: int = 0,
) -> List[Trajectory]:
    """Roll ``n`` complete episodes with frozen ``params``.

    ``sample`` draws actions from the masked distribution; ``greedy``
    takes the argmax (lowest flat index on ties).  Both are
    deterministic in ``seed``: one master stream derives per-episode
    reset seeds and, in sample mode, the action draws.
    """
    if mode not in ("sample", "greedy"):
        raise ValueError(f"unknown rollout mode {mode!r}")
    if n < 0:
        raise ValueError("episode count must be non-negative")
    env = RansomwareEnv(scenario, seed=seed)
    nets.ensure_dims(params, env.obs_dim, env.n_actions)
    master = np.random.RandomState(seed)
    out: List[Trajectory] = []
    for _ in range(n):
        obs = env.reset(seed=int(master.randint(0, 2**31 - 1)))
        steps: List[TrajectoryStep] = []
        done = False
        while not done:
            dist = nets.policy_forward(params, obs.features, obs.mask)
            if mode == "sample":
                a = nets.sample_action(dist, master)
            else:
                a = nets.greedy_action(dist)
            outcome = env.step(a)
            steps.append(
                TrajectoryStep(
                    index=len(steps) + 1,
                    kind=outcome.info["kind"],
                    target=outcome.info["target"],
                    success=outcome.info["success"],
                    reward=outcome.reward,
                    clock=outcome.info["clock"],
                )
            )
            done = outcome.done
            obs = outcome.observation
        out.append(Trajectory(steps=steps, terminal_reason=env.termination_reason))
    return out


# -- aggregation -------------------------------------------------------------


@dataclass
class AggregateReport:
    n_episodes: int
    mean: Dict[str, float]
    sd: Dict[str, float]
    frequencies: Dict[Address, float]
    label: str = ""
    scenario_hash: str = ""


def _mean_sd(values: np.ndarray) -> Tuple[float, float]:
    mean = float(values.mean())
    sd = 0.0 if len(values) < 2 else float(values.std(ddof=1))
    return mean, sd


def aggregate(
    trajectories: Sequence[Trajectory],
    addresses: Optional[Sequence[Address]] = None,
    label: str = "",
    scenario: Optional[ScenarioConfig] = None,
) -> AggregateReport:
    """Reduce trajectories to means, sample deviations, and frequencies.

    ``addresses`` (or ``scenario``) pins the full host list so hosts
    that were never encrypted still report frequency zero; without it
    only hosts seen in some step appear.
    """
    if not trajectories:
        raise ValueError("aggregate needs at least one trajectory")
    if scenario is not None and addresses is None:
        addresses = [h.address for h in scenario.hosts]
    if addresses is None:
        seen = {s.target for t in trajectories for s in t.steps}
        addresses = sorted(seen)
    mean: Dict[str, float] = {}
    sd: Dict[str, float] = {}
    for metric in METRICS:
        vals = np.array([t.totals[metric] for t in trajectories], dtype=np.float64)
        mean[metric], sd[metric] = _mean_sd(vals)
    counts = {addr: 0 for addr in addresses}
    for t in trajectories:
        for s in t.steps:
            if s.kind == "encrypt" and s.success:
                if s.target in counts:
                    counts[s.target] += 1
    n = len(trajectories)
    freqs = {addr: counts[addr] / n for addr in addresses}
    return AggregateReport(
        n_episodes=n,
        mean=mean,
        sd=sd,
        frequencies=freqs,
        label=label,
        scenario_hash=scenario_hash(scenario) if scenario is not None else "",
    )


def host_frequency_ranking(report: AggregateReport, k: int) -> List[Tuple[Address, float]]:
    """Top ``k`` hosts by encryption frequency, address order on ties."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = sorted(report.frequencies.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


# -- report serialization ----------------------------------------------------


def _addr_key(addr: Address) -> str:
    return f"{addr[0]}:{addr[1]}"


def _parse_addr_key(key: str) -> Address:
    s, l = key.split(":")
    return (int(s), int(l))


def report_to_dict(report: AggregateReport) -> dict:
    return {
        "n_episodes": report.n_episodes,
        "mean": dict(report.mean),
        "sd": dict(report.sd),
        "frequencies": {_addr_key(a): f for a, f in sorted(report.frequencies.items())},
        "label": report.label,
        "scenario_hash": report.scenario_hash,
    }


def report_from_dict(doc: dict) -> AggregateReport:
    try:
        return AggregateReport(
            n_episodes=int(doc["n_episodes"]),
            mean={k: float(v) for k, v in doc["mean"].items()},
            sd={k: float(v) for k, v in doc["sd"].items()},
            frequencies={_parse_addr_key(k): float(v) for k, v in doc["frequencies"].items()},
            label=str(doc.get("label", "")),
            scenario_hash=str(doc.get("scenario_hash", "")),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"malformed aggregate report: {exc}") from exc


def save_report(path, report: AggregateReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> AggregateReport:
    with open(path, "r", encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


# -- path exports ------------------------------------------------------------


def export_path(trajectory: Trajectory, format: str = "csv") -> str:
    """Render a trajectory as a byte-stable document.

    CSV keeps exactly the six pinned columns; JSON additionally carries
    the terminal reason and totals.
    """
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PATH_CSV_HEADER)
        for s in trajectory.steps:
            writer.writerow(
                [
                    s.index,
                    s.kind,
                    f"({s.target[0]},{s.target[1]})",
                    s.success,
                    repr(float(s.reward)),
                    repr(float(s.clock)),
                ]
            )
        return buf.getvalue()
    if format == "json":
        doc = {
            "steps": [
                {
                    "step": s.index,
                    "action": s.kind,
                    "target": list(s.target),
                    "success": s.success,
                    "reward": s.reward,
                    "clock_s": s.clock,
                }
                for s in trajectory.steps
            ],
            "terminal_reason": trajectory.terminal_reason,
            "totals": dict(trajectory.totals),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown export format {format!r}")


def _parse_target(text: str) -> Address:
    inner = text.strip().lstrip("(").rstrip(")")
    s, l = inner.split(",")
    return (int(s), int(l))


def parse_path(document: str, format: str = "csv") -> Trajectory:
    """Inverse of :func:`export_path`.

    The JSON route restores the trajectory exactly.  CSV does not carry
    the terminal reason, so that field comes back empty; everything
    else, totals included, is recomputed losslessly from the rows.
    """
    if format == "csv":
        reader = csv.reader(io.StringIO(document))
        rows = list(reader)
        if not rows or rows[0] != PATH_CSV_HEADER:
            raise ValueError("attack path CSV header mismatch")
        steps = []
        for row in rows[1:]:
            if len(row) != len(PATH_CSV_HEADER):
                raise ValueError(f"attack path row has {len(row)} fields")
            steps.append(
                TrajectoryStep(
                    index=int(row[0]),
                    kind=row[1],
                    target=_parse_target(row[2]),
                    success=row[3] == "True",
                    reward=float(row[4]),
                    clock=float(row[5]),
                )
            )
        return Trajectory(steps=steps)
    if format == "json":
        doc = json.loads(document)
        steps = [
            TrajectoryStep(
                index=int(s["step"]),
                kind=s["action"],
                target=tuple(s["target"]),
                success=bool(s["success"]),
                reward=float(s["reward"]),
                clock=float(s["clock_s"]),
            )
            for s in doc["steps"]
        ]
        traj = Trajectory(steps=steps, terminal_reason=doc.get("terminal_reason", ""))
        if doc.get("totals") and doc["totals"] != traj.totals:
            raise ValueError("trajectory totals disagree with steps")
        return traj
    raise ValueError(f"unknown export format {format!r}")


# -- experiment comparison ---------------------------------------------------


def compare_experiments(reports: Sequence[AggregateReport]) -> dict:
    """Side-by-side metric table with successive deltas on the means.

    Column ``i``'s delta is its mean minus column ``i-1``'s, so a
    countermeasure column shows its cost against the baseline and a
    retrained column shows how much of that cost it won back.
    """
    if not reports:
        raise ValueError("compare_experiments needs at least one report")
    labels = [r.label or f"experiment_{i}" for i, r in enumerate(reports)]
    metrics = {}
    for metric in METRICS:
        means = [r.mean[metric] for r in reports]
        sds = [r.sd[metric] for r in reports]
        deltas = [means[i] - means[i - 1] for i in range(1, len(means))]
        metrics[metric] = {"means": means, "sds": sds, "deltas": deltas}
    return {"labels": labels, "metrics": metrics}


def comparison_to_csv(comparison: dict) -> str:
    labels = comparison["labels"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["metric"]
    header += [f"{lab}_mean" for lab in labels]
    header += [f"{lab}_sd" for lab in labels]
    header += [f"delta_{lab}" for lab in labels[1:]]
    writer.writerow(header)
    for metric in METRICS:
        row = comparison["metrics"][metric]
        cells = [metric]
        cells += [repr(float(v)) for v in row["means"]]
        cells += [repr(float(v)) for v in row["sds"]]
        cells += [repr(float(v)) for v in row["deltas"]]
        writer.writerow(cells)
    return buf.getvalue()
