"""Observable-dynamics panels (sigma_z traces)."""

import sys

from .render_all import main

if __name__ == "__main__":
    sys.exit(main(kind="dynamics"))
