"""Wire cutting with Clifford-aware sparse reconstruction."""

__version__ = "0.1.0"
