"""Digital simulation of a synchronized spin-1 limit-cycle oscillator."""

__version__ = "0.1.0"
