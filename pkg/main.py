#!/usr/bin/env python3
"""
hardsphere-bbgky - Standalone Launcher

Run this script from a source checkout without installing.
You can also install it as a command with: pip install -e .
"""

import sys
import os

# Add the src directory to path
script_dir = os.path.dirname(os.path.abspath(__file__))
src_dir = os.path.join(script_dir, "src")
if src_dir not in sys.path:
    sys.path.insert(0, src_dir)


def main():
    try:
        import numpy  # noqa: F401
        import scipy  # noqa: F401
    except ImportError:
        print("Error: numpy and scipy are required but not installed.")
        print("Install them with: pip install -r requirements.txt")
        sys.exit(1)

    from hardsphere_bbgky.harness.cli import main as cli_main

    sys.exit(cli_main())


if __name__ == "__main__":
    main()
