__version__ = "0.1.1"
__author__ = "hardsphere-bbgky contributors"


def main():
    """Entry point for the hardsphere-bbgky command."""
    import sys

    from .harness.cli import main as cli_main

    sys.exit(cli_main())
