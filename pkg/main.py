#!/usr/bin/env python3
"""
Elastic monotonicity entry point.

Run this file directly to use the command-line interface.

Usage:
    python main.py <command> --config <scenario.json> [--out DIR] [--threads K]
        [--seed S] [--override key.path=value ...] [--family FAMILY]

Commands:
    forward, nd, reconstruct-outer, reconstruct-inner,
    reconstruct-linearized, convergence, localize, calibrate
"""

import sys
from pathlib import Path

# Ensure the project root is in the path
project_root = Path(__file__).parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))


if __name__ == "__main__":
    from src.cli.main import main

    sys.exit(main())
