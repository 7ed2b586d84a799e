import sys

from madp.cli import main

sys.exit(main())
