#!/usr/bin/env python3
"""Train one RL agent at total capacity 32 and save checkpoint + epoch log.

    python3 scripts/train_rl_capacity32.py [config] [--seed N] [--out DIR]

The config needs a single rl agent and capacity; the packaged desk.env plus
the two overrides below is the quick-run default.
"""
import sys
import tempfile
from pathlib import Path

from roommem.cli import main

OVERRIDES = "include = desk.env\nagents = rl-scratch\ncapacities = 32\n"

if __name__ == "__main__":
    args = sys.argv[1:]
    if args and not args[0].startswith("-"):
        config = args.pop(0)
        sys.exit(main(["train", "--config", config, *args]))
    with tempfile.TemporaryDirectory() as td:
        cfg = Path(td) / "rl32.env"
        cfg.write_text(OVERRIDES)
        sys.exit(main(["train", "--config", cfg.as_posix(),
                       "--out", "runs/rl32", *args]))
