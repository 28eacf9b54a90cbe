import sys
from pathlib import Path

# make the sibling helpers module importable from every test file
sys.path.insert(0, str(Path(__file__).parent))
