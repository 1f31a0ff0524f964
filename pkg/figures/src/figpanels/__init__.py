"""figpanels: render drivenbath CSV archives into the comparison figures."""

__version__ = "0.1.0"
