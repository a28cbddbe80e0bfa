#!/usr/bin/env python3
"""
Padesum - Exponential-Sum Approximation
=======================================

Source-checkout launcher; equivalent to the installed ``padesum`` command.

Usage:
    python main.py approx --target gaussian --M 24 --ninf 2 --A 6.5 --B 16
    python main.py info
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from padesum.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
