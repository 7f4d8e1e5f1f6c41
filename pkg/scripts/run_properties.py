#!/usr/bin/env python3
"""Run both randomized structural-invariant suites (finite-difference and
semi-Lagrangian) and report per-invariant margins."""

import os
import sys

from torushj.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))

if __name__ == "__main__":
    code = 0
    for name in ("fd_properties", "sl_properties"):
        print(f"== {name} ==")
        config = os.path.join(HERE, "configs", f"{name}.toml")
        out = os.path.join("out", name)
        code = max(code, main(["properties", "--config", config, "--out", out,
                               *sys.argv[1:]]))
    sys.exit(code)
