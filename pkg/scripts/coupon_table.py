"""Expected scheduler draws: exact integral, Monte Carlo and asymptotic forms."""

import sys

from madp.cli import main

if __name__ == "__main__":
    sys.exit(main(["coupon", *sys.argv[1:]]))
