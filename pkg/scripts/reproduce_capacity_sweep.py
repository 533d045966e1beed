#!/usr/bin/env python3
"""Run the full agent x capacity x seed grid and write results/summary CSVs.

Defaults to the packaged desk.env (minutes-scale); pass paper.env or your
own config for the full-budget version, which takes hours on one CPU:

    python3 scripts/reproduce_capacity_sweep.py [config] [--out DIR] [--workers N]
"""
import sys

from roommem.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    config = args.pop(0) if args and not args[0].startswith("-") else "desk.env"
    sys.exit(main(["sweep", "--config", config, *args]))
