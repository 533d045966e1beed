"""Command-line surface: train, eval, sweep, trace, gen-kb.

Every command is driven by a config file plus a few overrides and is
deterministic given its inputs.  Exit codes: 0 success, 1 run failure,
2 bad config or unusable input file.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .configio import RL_AGENTS, ExperimentConfig, load_experiment
from .des import DesError
from .env import ConfigError
from .harness import agent_capacities, atomic_write_text, run_cell, sweep
from .kb import KbError, generate_synthetic_kb, write_kb
from .policies import GreedyQ, evaluate, run_episode
from .qnet import CheckpointError, QNetwork
from .seeding import ROLE_TEST, derive_seed
from .trainer import build_vocabulary, train

__all__ = ["main", "entry"]


def _single(values, what: str):
    if len(values) != 1:
        raise ConfigError(f"this command needs exactly one {what}, got {len(values)}")
    return values[0]


def _load(args) -> ExperimentConfig:
    return load_experiment(args.config)


def _train_log_csv(result) -> str:
    lines = ["epoch,train_loss_mean,val_reward_mean,val_reward_std,epsilon_end,wall_seconds"]
    for e in result.epochs:
        lines.append(f"{e.epoch},{e.train_loss_mean:.6f},{e.val_reward_mean:.4f},"
                     f"{e.val_reward_std:.4f},{e.epsilon_end:.6f},{e.wall_seconds:.3f}")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    config = _load(args)
    agent = _single(config.agents, "agent")
    if agent not in RL_AGENTS:
        raise ConfigError(f"train needs an rl agent, got {agent!r}")
    variant = agent.split("-", 1)[1]
    capacity = _single(config.capacities, "capacity")
    caps = agent_capacities(agent, capacity)
    seed = args.seed if args.seed is not None else config.seeds[0]
    out = Path(args.out if args.out else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = train(config.env, variant, caps, config.train, seed)
    ckpt = out / "checkpoint.ckpt"
    result.net.save(ckpt)
    atomic_write_text(out / "train_log.csv", _train_log_csv(result))
    print(f"best_epoch={result.best_epoch} val_mean={result.best_val_mean:.4f} "
          f"val_std={result.best_val_std:.4f} checkpoint={ckpt}")
    return 0


def cmd_eval(args) -> int:
    config = _load(args)
    agent = _single(config.agents, "agent")
    capacity = _single(config.capacities, "capacity")
    seed = args.seed if args.seed is not None else config.seeds[0]
    if agent in RL_AGENTS:
        if not args.checkpoint:
            raise ConfigError(f"agent {agent!r} needs --checkpoint")
        net = QNetwork.load(args.checkpoint)
        vocab, _ = build_vocabulary(config.env)
        if net.vocab != vocab:
            raise CheckpointError("checkpoint vocabulary does not match this environment")
        caps = agent_capacities(agent, capacity)
        mean, std = evaluate(GreedyQ(net), config.env, config.train.eval_iterations,
                             derive_seed(seed, ROLE_TEST), caps,
                             variant=agent.split("-", 1)[1])
    else:
        cell = run_cell(config.env, config.train, agent, capacity, seed)
        mean, std = cell.mean, cell.std
    print(f"agent={agent} capacity={capacity} seed={seed} "
          f"mean_reward={mean:.4f} std_reward={std:.4f}")
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    out_dir = args.out if args.out else None
    results, any_failed = sweep(config, out_dir=out_dir, workers=args.workers)
    where = Path(out_dir if out_dir else config.out_dir)
    print(f"wrote {where / 'results.csv'} and {where / 'summary.csv'} "
          f"({len(results)} cells, {sum(r.failed for r in results)} failed)")
    return 1 if any_failed else 0


def cmd_trace(args) -> int:
    config = _load(args)
    agent = _single(config.agents, "agent")
    if agent not in RL_AGENTS:
        raise ConfigError(f"trace needs an rl agent, got {agent!r}")
    variant = agent.split("-", 1)[1]
    capacity = _single(config.capacities, "capacity")
    caps = agent_capacities(agent, capacity)
    seed = args.seed if args.seed is not None else config.seeds[0]
    net = QNetwork.load(args.checkpoint)
    vocab, _ = build_vocabulary(config.env)
    if net.vocab != vocab:
        raise CheckpointError("checkpoint vocabulary does not match this environment")
    steps = tuple(int(s) for s in args.snapshot_steps.split(",") if s.strip())
    total, trace = run_episode(GreedyQ(net), config.env, caps, variant=variant,
                               seed=seed, trace=True, snapshot_steps=steps)
    out = Path(args.out if args.out else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trace.jsonl"
    atomic_write_text(path, trace.to_jsonl())
    print(f"total_reward={total} records={len(trace.records)} trace={path}")
    return 0


def cmd_gen_kb(args) -> int:
    kb = generate_synthetic_kb(args.seed, args.n_objects, args.n_locations)
    write_kb(kb, args.out)
    print(f"wrote {args.out}: {len(kb.objects)} objects, {len(kb.locations)} "
          f"locations, {len(kb.edges)} edges")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roommem",
        description="Room-simulation memory agents: training, evaluation, sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one RL agent, save checkpoint + log")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score one agent on held-out episodes")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="run the agent x capacity x seed grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_trace = sub.add_parser("trace", help="record one greedy episode with Q-values")
    p_trace.add_argument("--config", required=True)
    p_trace.add_argument("--checkpoint", required=True)
    p_trace.add_argument("--seed", type=int, default=None)
    p_trace.add_argument("--out", default=None)
    p_trace.add_argument("--snapshot-steps", default="2,86")
    p_trace.set_defaults(func=cmd_trace)

    p_kb = sub.add_parser("gen-kb", help="write a synthetic knowledge-base TSV")
    p_kb.add_argument("--seed", type=int, required=True)
    p_kb.add_argument("--n-objects", type=int, required=True)
    p_kb.add_argument("--n-locations", type=int, required=True)
    p_kb.add_argument("--out", required=True)
    p_kb.set_defaults(func=cmd_gen_kb)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KbError, DesError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
