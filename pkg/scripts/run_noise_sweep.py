#!/usr/bin/env python3
"""Run the CNN Gaussian-noise sweep and drop artifacts under results/."""

import sys
from pathlib import Path

from nish_lab.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(main([
        "noise-sweep",
        "--config", str(ROOT / "configs" / "noise_sweep_cnn5.toml"),
        "--out", "results/noise_sweep",
        *sys.argv[1:],
    ]))
