import sys
from pathlib import Path

# Make the test-only oracles package importable regardless of how pytest
# was invoked.
sys.path.insert(0, str(Path(__file__).parent))
