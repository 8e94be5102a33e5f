"""Experiment runner: single runs, seeded sweeps, summaries and plot tables."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .agents import AGENTS, make_agent
from .mdp import TabularMdp, make_env, step

log = logging.getLogger(__name__)

CENSORED = "CENSORED"
MAX_CHAIN_SIZE = 160

# Hyperparameters of the published tree and chain experiments. UBE and BDQN
# have none listed because they explore uniformly under every setting.
PRESETS: dict[tuple[str, str], dict[str, Any]] = {
    ("tree", "su"): dict(theta=1e4, beta=1e-3, zeta=1.0, hidden=20, steps_per_episode=10, replay_capacity=10_000),
    ("tree", "bootstrap"): dict(K=10, bootstrap_p=0.75, prior_weight=0.1, hidden=20, steps_per_episode=10),
    ("tree", "bootstrap-25x"): dict(K=10, bootstrap_p=1.0, prior_weight=0.0, hidden=20, steps_per_episode=250),
    ("tree", "bdqn"): dict(theta=1e4, beta=1e-3, hidden=20),
    ("tree", "ube"): dict(theta=1e4, beta=1e-3),
    ("chain", "su"): dict(theta=1.0, beta=1e-2, zeta=1.0, hidden=20, steps_per_episode=40, replay_capacity=10_000),
}
PRESETS[("tree-tied", "bdqn")] = PRESETS[("tree", "bdqn")]

#: Named variants that resolve to a registered agent plus fixed options.
AGENT_ALIASES = {"bootstrap-25x": "bootstrap"}


def resolve_agent(name: str) -> str:
    base = AGENT_ALIASES.get(name, name)
    if base not in AGENTS:
        raise ValueError(f"unknown agent {name!r}; choose from {sorted(AGENTS) + sorted(AGENT_ALIASES)}")
    return base


def preset_options(env: str, agent: str) -> dict[str, Any]:
    """Published hyperparameters for ``(env, agent)``, or an empty dict."""
    return dict(PRESETS.get((env, agent), {}))


def mix_seed(*parts: Any) -> int:
    """64-bit seed from arbitrary parts: first 8 bytes of BLAKE2b over their JSON encoding."""
    digest = hashlib.blake2b(json.dumps(parts, separators=(",", ":")).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run.

    ``seed`` is the seed index within a sweep cell. The environment seed mixes
    ``(master_seed, env, size, seed)`` so every agent sees the same instance;
    the agent seed additionally mixes in the agent name.
    """

    env: str = "tree"
    size: int = 10
    agent: str = "su"
    seed: int = 0
    master_seed: int = 0
    max_episodes: int = 5000
    solve_window: int = 10
    use_preset: bool = True
    agent_options: dict[str, Any] = field(default_factory=dict, hash=False)
    record_returns: bool = False

    def __post_init__(self) -> None:
        resolve_agent(self.agent)
        if self.size < 1 or self.max_episodes < 1 or self.solve_window < 1:
            raise ValueError("size, max_episodes and solve_window must be positive")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown RunConfig fields: {sorted(unknown)}")
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def env_seed(self) -> int:
        return mix_seed(self.master_seed, self.env, self.size, self.seed)

    def agent_seed(self) -> int:
        return mix_seed(self.master_seed, self.env, self.size, self.agent, self.seed)

    def resolved_options(self) -> dict[str, Any]:
        opts = preset_options(self.env, self.agent) if self.use_preset else {}
        opts.update(self.agent_options)
        return opts


@dataclass
class RunRecord:
    env: str
    size: int
    agent: str
    seed: int
    config_hash: str
    episodes_to_solve: int | None
    wall_seconds: float
    first_success: int | None = None
    error: str | None = None
    returns: list[float] | None = None

    @property
    def censored(self) -> bool:
        return self.episodes_to_solve is None

    def row(self) -> dict[str, Any]:
        return {
            "env": self.env, "size": self.size, "agent": self.agent, "seed": self.seed,
            "episodes_to_solve": CENSORED if self.censored else self.episodes_to_solve,
            "censored": int(self.censored), "wall_seconds": f"{self.wall_seconds:.3f}",
            "config_hash": self.config_hash,
        }


RUN_COLUMNS = ["env", "size", "agent", "seed", "episodes_to_solve", "censored", "wall_seconds", "config_hash"]


def optimal_return(env: TabularMdp) -> float:
    """Best undiscounted return of a deterministic episodic env within its horizon."""
    v = np.zeros(env.n_states)
    for _ in range(env.horizon):
        q = env.reward_mean + np.where(env.terminal[env.next_state], 0.0, v[env.next_state])
        v = np.where(env.terminal, 0.0, q.max(axis=1))
    return float(v[env.start])


def policy_return(env: TabularMdp, actions: np.ndarray) -> float:
    s, total = env.start, 0.0
    for _ in range(env.horizon):
        e = step(env, s, int(actions[s]))
        total += e.r
        if e.done:
            break
        s = e.s_next
    return total


def run_single(cfg: RunConfig) -> RunRecord:
    """Run episodes until solved or ``max_episodes``.

    Greedy-rule agents are solved at the first episode after which their mean
    policy collects the optimal return, re-verified for ``solve_window``
    consecutive episodes. A streak in progress at the cap is allowed to finish.
    First-success agents are solved at their first optimal episode.
    Numerical failures end the run as censored with the error recorded.
    """
    t0 = time.perf_counter()
    env = make_env(cfg.env, cfg.size, action_seed=cfg.env_seed() % 2**32)
    rng = np.random.default_rng(cfg.agent_seed())
    best = optimal_return(env) - 1e-9
    solved = first = None
    error = None
    returns: list[float] = []
    try:
        agent = make_agent(resolve_agent(cfg.agent), env, rng, **cfg.resolved_options())
        streak = 0
        ep = 0
        while ep < cfg.max_episodes or 0 < streak:
            ep += 1
            agent.begin_episode()
            s, ret = env.start, 0.0
            for _ in range(env.horizon):
                e = step(env, s, agent.act(s))
                agent.observe(e)
                ret += e.r
                if e.done:
                    break
                s = e.s_next
            agent.end_episode()
            if cfg.record_returns:
                returns.append(ret)
            if first is None and ret >= best:
                first = ep
                if agent.solve_rule == "first_success":
                    solved = ep
                    break
            if agent.solve_rule == "first_success":
                continue
            if policy_return(env, agent.greedy_policy_snapshot()) >= best:
                streak += 1
                if streak == cfg.solve_window:
                    solved = ep - cfg.solve_window + 1
                    break
            else:
                streak = 0
                if ep >= cfg.max_episodes:
                    break
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        solved = None
        log.warning("run %s failed: %s", cfg.config_hash(), error)
    return RunRecord(
        cfg.env, cfg.size, cfg.agent, cfg.seed, cfg.config_hash(), solved,
        time.perf_counter() - t0, first, error, returns if cfg.record_returns else None,
    )


def censored_median(values: Sequence[int | None]) -> float:
    """Median with censored entries treated as ``+inf``."""
    if not values:
        return math.inf
    return float(np.median([math.inf if v is None else v for v in values]))


def classify(n_solved: int, n_seeds: int) -> str:
    return "all" if n_solved == n_seeds else "none" if n_solved == 0 else "some"


@dataclass
class CellSummary:
    env: str
    size: int
    agent: str
    n_seeds: int
    n_solved: int
    median: float
    classification: str

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["median"] = CENSORED if math.isinf(self.median) else self.median
        return d


@dataclass
class LogLogFit:
    env: str
    agent: str
    slope: float
    intercept: float
    sizes: list[int]

    def predict(self, L: float) -> float:
        return 10 ** (self.slope * math.log10(L) + self.intercept)


@dataclass
class SweepSummary:
    cells: list[CellSummary]
    fits: list[LogLogFit]
    records: list[RunRecord] = field(default_factory=list)

    def cell(self, env: str, size: int, agent: str) -> CellSummary:
        for c in self.cells:
            if (c.env, c.size, c.agent) == (env, size, agent):
                return c
        raise KeyError((env, size, agent))

    def to_dict(self) -> dict[str, Any]:
        return {
            "solve_criterion": "greedy mean policy optimal for 10 consecutive episodes; first optimal episode for uniform",
            "censoring": "censored runs count as +inf; median CENSORED when more than half are censored",
            "cells": [c.to_dict() for c in self.cells],
            "fits": [dataclasses.asdict(f) for f in self.fits],
        }


def loglog_fit(sizes: Sequence[float], medians: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit of ``log10 T = slope * log10 L + intercept``."""
    slope, intercept = np.polyfit(np.log10(sizes), np.log10(medians), 1)
    return float(slope), float(intercept)


def summarize(records: Iterable[RunRecord]) -> SweepSummary:
    groups: dict[tuple[str, int, str], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.env, r.size, r.agent), []).append(r)
    cells = []
    for (env, size, agent), rs in sorted(groups.items()):
        n_solved = sum(not r.censored for r in rs)
        cells.append(CellSummary(env, size, agent, len(rs), n_solved,
                                 censored_median([r.episodes_to_solve for r in rs]), classify(n_solved, len(rs))))
    fits = []
    for env, agent in sorted({(c.env, c.agent) for c in cells if c.env == "chain"}):
        pts = [(c.size, c.median) for c in cells if (c.env, c.agent) == (env, agent) and math.isfinite(c.median)]
        if len(pts) >= 2:
            L, T = zip(*pts)
            fits.append(LogLogFit(env, agent, *loglog_fit(L, T), sizes=list(L)))
    return SweepSummary(cells, fits, list(records))


def sweep_configs(env: str, sizes: Sequence[int], agents: Sequence[str], seeds: int,
                  agent_options: dict[str, dict[str, Any]] | None = None, **common) -> list[RunConfig]:
    """One config per ``(size, agent, seed index)``; ``agent_options`` is keyed by agent name."""
    if not sizes or not agents or seeds < 1:
        raise ValueError("need at least one size, agent and seed")
    if env == "chain" and max(sizes) > MAX_CHAIN_SIZE:
        raise ValueError(f"chain sizes are capped at {MAX_CHAIN_SIZE}")
    opts = agent_options or {}
    return [RunConfig(env=env, size=L, agent=a, seed=i, agent_options=dict(opts.get(a, {})), **common)
            for L in sizes for a in agents for i in range(seeds)]


def run_sweep(env: str, sizes: Sequence[int], agents: Sequence[str], seeds: int = 5,
              workers: int | None = None, agent_options: dict[str, dict[str, Any]] | None = None,
              **common) -> SweepSummary:
    """Run every ``(size, agent, seed)`` cell, in parallel when ``workers > 1``.

    Failed runs surface as censored records with an error message; the sweep
    itself never aborts because of one cell.
    """
    configs = sweep_configs(env, sizes, agents, seeds, agent_options, **common)
    workers = workers or 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_single, configs))
    else:
        records = [run_single(c) for c in configs]
    return summarize(records)


def write_runs_csv(records: Iterable[RunRecord], path: Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=RUN_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())


def load_runs(path: str | os.PathLike) -> list[RunRecord]:
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            ets = row["episodes_to_solve"]
            out.append(RunRecord(
                row["env"], int(row["size"]), row["agent"], int(row["seed"]), row["config_hash"],
                None if ets == CENSORED else int(ets), float(row["wall_seconds"]),
            ))
    return out


def _fmt(x: float) -> str:
    return CENSORED if math.isinf(x) else repr(x)


def emit_outputs(summary: SweepSummary, out_dir: str | os.PathLike, svg: bool = False) -> list[Path]:
    """Write ``runs.csv``, ``summary.json``, ``fig2.csv``, ``fig3.csv`` and optional SVG plots."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "runs.csv", out / "summary.json", out / "fig2.csv", out / "fig3.csv"]
        write_runs_csv(summary.records, paths[0])
        paths[1].write_text(json.dumps(summary.to_dict(), indent=2))
        with open(paths[2], "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["env", "size", "agent", "median", "n_solved", "n_seeds", "classification"])
            for c in summary.cells:
                w.writerow([c.env, c.size, c.agent, _fmt(c.median), c.n_solved, c.n_seeds, c.classification])
        with open(paths[3], "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["agent", "L", "median_T", "log10L", "log10T"])
            for c in summary.cells:
                if c.env == "chain" and math.isfinite(c.median):
                    w.writerow([c.agent, c.size, c.median, math.log10(c.size), math.log10(c.median)])
    except OSError as exc:
        raise OSError(f"could not write outputs to {out}: {exc}") from exc
    if svg:
        paths += plot_summary(summary, out)
    return paths


def plot_summary(summary: SweepSummary, out_dir: str | os.PathLike) -> list[Path]:
    """Render median-vs-size plots to SVG (requires matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    paths = []
    colours = {"all": "tab:blue", "some": "tab:orange", "none": "tab:red"}
    for env in sorted({c.env for c in summary.cells}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for agent in sorted({c.agent for c in summary.cells if c.env == env}):
            cs = [c for c in summary.cells if (c.env, c.agent) == (env, agent)]
            finite = [c for c in cs if math.isfinite(c.median)]
            ax.plot([c.size for c in finite], [c.median for c in finite], "-", label=agent, alpha=0.6)
            ax.scatter([c.size for c in finite], [c.median for c in finite], c=[colours[c.classification] for c in finite], s=15)
        for fit in summary.fits:
            if fit.env == env:
                xs = np.array(sorted(fit.sizes), dtype=float)
                ax.plot(xs, [fit.predict(x) for x in xs], "k--", label=f"{fit.agent} fit, slope {fit.slope:.2f}")
        if env == "chain":
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("size L")
        ax.set_ylabel("median episodes to solve")
        ax.set_title(env)
        ax.legend(fontsize=8)
        p = out / f"{env}.svg"
        fig.savefig(p, format="svg", bbox_inches="tight")
        plt.close(fig)
        paths.append(p)
    return paths
