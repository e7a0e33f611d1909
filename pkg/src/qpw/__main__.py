"""Allow `python -m qpw ...` as an alias for the qpw console script."""

import sys

from .cli import main

sys.exit(main())
