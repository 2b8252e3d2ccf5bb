#!/usr/bin/env python3
"""Fractional-derivative benchmark table (errors and orders on the graded
cubic mesh). Extra flags are passed straight through to the CLI."""

import sys

from tfch.cli import main

if __name__ == "__main__":
    sys.exit(main(["caputo-convergence",
                   "--alphas", "0.3,0.5,0.7,0.9",
                   "--Ns", "250,500,1000,2000,4000",
                   "--out", "results/caputo_table"] + sys.argv[1:]))
