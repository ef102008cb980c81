#!/usr/bin/env python3
"""Train the reference 3-block Nish MLP and drop artifacts under results/."""

import sys
from pathlib import Path

from nish_lab.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(main([
        "train",
        "--config", str(ROOT / "configs" / "train_mlp_nish.toml"),
        "--out", "results/mlp_nish",
        *sys.argv[1:],
    ]))
