#!/usr/bin/env python3
"""
Entry point for the IGA-L spectral experiments
Usage: uv run python main.py <points|assemble|spectra|solve|sweep> [options]
"""

import sys

from iga_spectra.cli import main

if __name__ == "__main__":
    sys.exit(main())
