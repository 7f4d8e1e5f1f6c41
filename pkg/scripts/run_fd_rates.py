#!/usr/bin/env python3
"""Run the finite-difference convergence-rate study and print the fitted
orders.  Writes rates.csv / rates.json under --out."""

import os
import sys

from torushj.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))

if __name__ == "__main__":
    config = os.path.join(HERE, "configs", "fd_rates.toml")
    sys.exit(main(["rates", "--config", config, *sys.argv[1:]]))
