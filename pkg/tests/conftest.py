import sys
from pathlib import Path

# test helpers (axml_builder, manifest_fixtures) live beside the tests
sys.path.insert(0, str(Path(__file__).parent))
