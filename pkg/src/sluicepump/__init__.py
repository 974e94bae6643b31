"""Cooper-pair sluice pumping with an engineered phase-noise environment."""

__version__ = "0.1.0"
