"""Dense dual-attention network for light-field image super-resolution."""

__version__ = "0.1.0"
