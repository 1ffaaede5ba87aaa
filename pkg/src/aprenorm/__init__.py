"""Period-doubling renormalization for area-preserving reversible twist maps."""
__version__ = "0.1.0"
