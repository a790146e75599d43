"""Boson-sampling advantage thresholds for single-photon sources, plus the
source-characterization fits that feed them."""

__version__ = "0.1.0"
