"""Master-equation simulator for reservoir-engineered two-mode squeezing of a trapped ion."""

__version__ = "0.1.0"
