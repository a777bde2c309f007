#!/usr/bin/env python3
"""Regenerate the committed golden outputs for the bundled synthetic dataset.

Run after any intentional change to the pipeline's numerical behaviour; the
acceptance suite byte-compares fresh runs against data/golden/.
"""
from __future__ import annotations

import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from restool.cli import main  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "data" / "golden"


def refresh() -> int:
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    code = main(["all", "--config", str(ROOT / "data" / "synthetic" / "config.json"),
                 "--out", str(GOLDEN)])
    if code == 0:
        n_files = sum(1 for p in GOLDEN.rglob("*") if p.is_file())
        print(f"golden outputs refreshed: {n_files} files under {GOLDEN}")
    return code


if __name__ == "__main__":
    sys.exit(refresh())
