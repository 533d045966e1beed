"""Sweep orchestration: run agent x capacity x seed cells, aggregate CSVs.

Single-system baselines get their whole capacity budget; agents that use
both long-term systems split it evenly.  Cells are independent and may run
in a process pool; aggregation sorts rows so output bytes never depend on
completion order.  A failed cell is marked in the results and the sweep
carries on.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configio import AGENTS, ExperimentConfig
from .env import ConfigError, EnvConfig
from .policies import (
    EpisodicOnly,
    GreedyQ,
    RandomPolicy,
    SemanticOnly,
    run_episode,
)
from .seeding import ROLE_POLICY, ROLE_TEST, derive_rng, derive_seed
from .trainer import TrainConfig, train

__all__ = ["agent_capacities", "run_cell", "CellResult", "sweep",
           "write_results_csv", "write_summary_csv", "atomic_write_text"]

_SPLIT_AGENTS = ("random", "rl-scratch", "rl-pretrained")


def agent_capacities(agent: str, total: int) -> tuple[int, int]:
    """(episodic, semantic) capacities for an agent's total budget."""
    if total < 1:
        raise ConfigError("total capacity must be positive")
    if agent == "episodic-only":
        return total, 0
    if agent == "semantic-only":
        return 0, total
    if agent in _SPLIT_AGENTS:
        if total % 2:
            raise ConfigError(f"agent {agent!r} needs an even total capacity, got {total}")
        return total // 2, total // 2
    raise ConfigError(f"unknown agent {agent!r}")


@dataclass(frozen=True)
class CellResult:
    agent: str
    capacity: int
    seed: int
    totals: tuple[int, ...]  # per-evaluation-episode rewards; empty on failure
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def mean(self) -> float:
        return float(np.mean(self.totals))

    @property
    def std(self) -> float:
        return float(np.std(self.totals))


def _eval_policy(policy, env_config: EnvConfig, n_iterations: int, seed: int,
                 capacities: tuple[int, int], variant: str) -> tuple[int, ...]:
    totals = []
    for i in range(n_iterations):
        total, _ = run_episode(policy, env_config, capacities, variant=variant,
                               seed=derive_seed(seed, i))
        totals.append(total)
    return tuple(totals)


def run_cell(env_config: EnvConfig, train_config: TrainConfig, agent: str,
             capacity: int, seed: int) -> CellResult:
    """Evaluate one agent at one capacity with one seed.  RL agents are
    trained first; everything is scored on the same held-out seed stream."""
    caps = agent_capacities(agent, capacity)
    test_seed = derive_seed(seed, ROLE_TEST)
    n_iter = train_config.eval_iterations
    if agent == "episodic-only":
        policy, variant = EpisodicOnly(), "scratch"
    elif agent == "semantic-only":
        policy, variant = SemanticOnly(), "scratch"
    elif agent == "random":
        policy, variant = RandomPolicy(derive_rng(seed, ROLE_POLICY)), "scratch"
    elif agent in ("rl-scratch", "rl-pretrained"):
        variant = agent.split("-", 1)[1]
        result = train(env_config, variant, caps, train_config, seed)
        policy = GreedyQ(result.net)
    else:
        raise ConfigError(f"unknown agent {agent!r}")
    totals = _eval_policy(policy, env_config, n_iter, test_seed, caps, variant)
    return CellResult(agent, capacity, seed, totals)


def _cell_task(args) -> CellResult:
    env_config, train_config, agent, capacity, seed = args
    try:
        return run_cell(env_config, train_config, agent, capacity, seed)
    except Exception as exc:  # mark and continue; the sweep reports at the end
        return CellResult(agent, capacity, seed, (), error=f"{type(exc).__name__}: {exc}")


def sweep(config: ExperimentConfig, out_dir: str | None = None,
          workers: int = 1) -> tuple[list[CellResult], bool]:
    """Run the full grid and write results.csv + summary.csv.  Returns the
    sorted cell results and whether any cell failed."""
    config.validate()
    tasks = [(config.env, config.train, agent, capacity, seed)
             for agent in config.agents
             for capacity in config.capacities
             for seed in config.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = [_cell_task(t) for t in tasks]
    order = {a: i for i, a in enumerate(AGENTS)}
    results.sort(key=lambda r: (order[r.agent], r.capacity, r.seed))
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out / "results.csv")
    write_summary_csv(results, config, out / "summary.csv")
    return results, any(r.failed for r in results)


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_results_csv(results: list[CellResult], path: Path) -> None:
    lines = ["agent,capacity,seed,mean_reward,std_reward"]
    for r in results:
        if r.failed:
            lines.append(f"{r.agent},{r.capacity},{r.seed},failed,failed")
        else:
            lines.append(f"{r.agent},{r.capacity},{r.seed},{r.mean:.4f},{r.std:.4f}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_summary_csv(results: list[CellResult], config: ExperimentConfig,
                      path: Path) -> None:
    """Agent x capacity grid; each cell pools every evaluation episode across
    seeds into one mean +- std."""
    caps = sorted(config.capacities)
    by_key: dict[tuple[str, int], list[int]] = {}
    failed: set[tuple[str, int]] = set()
    for r in results:
        key = (r.agent, r.capacity)
        if r.failed:
            failed.add(key)
        else:
            by_key.setdefault(key, []).extend(r.totals)
    lines = ["agent," + ",".join(str(c) for c in caps)]
    for agent in config.agents:
        cells = []
        for c in caps:
            key = (agent, c)
            if key in failed:
                cells.append("failed")
            elif key in by_key:
                arr = np.asarray(by_key[key], dtype=np.float64)
                cells.append(f"{arr.mean():.1f} ± {arr.std():.1f}")
            else:
                cells.append("")
        lines.append(agent + "," + ",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
