#!/usr/bin/env python3
"""Admissibility threshold curve, q3 grid, and the (rho, alpha) fixed point."""

import sys

from tfch.cli import main

if __name__ == "__main__":
    sys.exit(main(["rho-star", "--q3", "--fixed-point",
                   "--out", "results/constants"] + sys.argv[1:]))
