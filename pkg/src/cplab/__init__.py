"""Cell probe laboratory: non-adaptive data structures, encoding protocols and depth-2 circuits."""

__version__ = "0.1.0"
