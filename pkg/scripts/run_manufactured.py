#!/usr/bin/env python3
"""Forced-solution accuracy sweep at the default resolutions."""

import sys

from tfch.cli import main

if __name__ == "__main__":
    sys.exit(main(["manufactured",
                   "--alphas", "0.1,0.3,0.6,0.9",
                   "--Ns", "200", "--M", "60",
                   "--out", "results/manufactured"] + sys.argv[1:]))
