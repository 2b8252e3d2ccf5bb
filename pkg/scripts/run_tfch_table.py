#!/usr/bin/env python3
"""Temporal self-convergence of the full solver against an N0=200 reference.

Runs the four alpha columns in two worker threads; pass --workers 1 to
serialize (the CSV bytes are identical either way).
"""

import sys

from tfch.cli import main

if __name__ == "__main__":
    sys.exit(main(["tfch-convergence",
                   "--alphas", "0.3,0.5,0.7,0.9",
                   "--Ns", "15,18,21,24",
                   "--N0", "200", "--M", "60",
                   "--kappa", "0.01", "--epsilon", "0.1",
                   "--workers", "2",
                   "--out", "results/tfch_table"] + sys.argv[1:]))
