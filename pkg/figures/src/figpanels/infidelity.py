"""Negative-log-infidelity comparison panels."""

import sys

from .render_all import main

if __name__ == "__main__":
    sys.exit(main(kind="infidelity"))
