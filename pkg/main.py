#!/usr/bin/env python3
"""Entry point for the opm-lightshift CLI.

This module allows running the simulator directly with:
    python main.py [command]

For installed usage, use:
    opm [command]
    opm-lightshift [command]
"""

from opm_lightshift.cli import app

if __name__ == "__main__":
    app()
