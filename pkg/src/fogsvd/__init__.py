"""Privacy-preserving SVD over fog devices."""
__version__ = "0.1.0"
