"""Ten analysts: independent PMW, shared PMW, SCR and the two schedulers over p."""

import sys

from madp.cli import main

if __name__ == "__main__":
    sys.exit(main(["sweep", *sys.argv[1:]]))
