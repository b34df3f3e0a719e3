#!/usr/bin/env python3
"""
procbench - entry point when run from a source checkout
"""

import sys

from src.main import main

if __name__ == "__main__":
    sys.exit(main())
