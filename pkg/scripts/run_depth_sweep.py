#!/usr/bin/env python3
"""Run the desk-scale MLP depth sweep and drop artifacts under results/."""

import sys
from pathlib import Path

from nish_lab.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(main([
        "depth-sweep",
        "--config", str(ROOT / "configs" / "depth_sweep.toml"),
        "--out", "results/depth_sweep",
        *sys.argv[1:],
    ]))
