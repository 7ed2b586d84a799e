"""Two analysts, one PMW / split-Laplace instance, arrival bias p from 0.5 to 1."""

import sys

from madp.cli import main

if __name__ == "__main__":
    sys.exit(main(["motivate", *sys.argv[1:]]))
