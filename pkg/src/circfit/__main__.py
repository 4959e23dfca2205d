"""Entry point for ``python -m circfit``."""

import sys

from .cli import main

sys.exit(main())
