#!/usr/bin/env python3
"""Run the bundled replay pipeline end to end, no network required.

Replays the committed transcripts through retrieval, generation and
evaluation, writes all artifacts to ./out/replay_demo and prints the
metric summary.
"""
from __future__ import annotations

import sys
from pathlib import Path

from doc2table.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "tests" / "fixtures" / "pipeline" / "config.json"
OUT = ROOT / "out" / "replay_demo"

if __name__ == "__main__":
    code = main(["pipeline", "--config", str(CONFIG), "--out", str(OUT)])
    print(f"artifacts in {OUT}")
    sys.exit(code)
