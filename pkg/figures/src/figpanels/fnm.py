"""Non-Markovian drive-correction panels (f_NM curves)."""

import sys

from .render_all import main

if __name__ == "__main__":
    sys.exit(main(kind="fnm"))
