"""
Shared pytest setup: src/ on the import path and the slow marker.
"""

import sys
from pathlib import Path

sys.path.append(str(Path(__file__).parent.parent / 'src'))


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale runs (deselect with -m "not slow")')
