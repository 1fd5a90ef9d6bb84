import sys
from pathlib import Path

# make oracles.py importable as a top-level module from any invocation dir
sys.path.insert(0, str(Path(__file__).resolve().parent))
