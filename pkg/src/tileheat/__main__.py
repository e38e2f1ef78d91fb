"""Run the tileheat command line front end with python -m tileheat."""

import sys

from tileheat.cli import main

sys.exit(main())
