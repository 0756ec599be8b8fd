"""Run the rieszlab command line with ``python -m rieszlab``."""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())  # pragma: no cover
