"""Long-range percolation on the canopy tree: samplers, walk constants and experiments."""

__version__ = "0.1.0"
