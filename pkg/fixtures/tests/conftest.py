from __future__ import annotations

import sys
from pathlib import Path

# make oracle.py (package root) and fixture_support importable
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
