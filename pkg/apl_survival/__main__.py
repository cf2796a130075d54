"""Entry point for python -m apl_survival."""

import sys

from .main import main

if __name__ == "__main__":
    sys.exit(main())
