"""Greedy split-Laplace vs SCR on the shared-prefix sequences Q and Q'."""

import sys

from madp.cli import main

if __name__ == "__main__":
    sys.exit(main(["adversarial", *sys.argv[1:]]))
