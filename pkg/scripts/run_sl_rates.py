#!/usr/bin/env python3
"""Run the semi-Lagrangian convergence-rate study (cosine potential,
h = dt^2 coupling) against the 8x fine-grid reference.  The reference runs
are cached under out/refcache, so repeat invocations are fast."""

import os
import sys

from torushj.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))

if __name__ == "__main__":
    config = os.path.join(HERE, "configs", "sl_rates.toml")
    sys.exit(main(["rates", "--config", config, *sys.argv[1:]]))
