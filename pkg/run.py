#!/usr/bin/env python3
"""
Run: single entry point for the texture separation toolkit.

  python run.py synth
  python run.py decompose --lambda 1 --mu 100
  python run.py mts --scene two-shell --size 128 --scales 2
  python run.py dmts --config configs/four_texture.json
  python run.py curves --size 512 --scale 8
"""

import sys
from pathlib import Path

# Ensure project root is on path
PROJECT_ROOT = Path(__file__).resolve().parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
