"""Complex angles between spacelike planes of Minkowski space and constant-angle surfaces."""

__version__ = "0.1.0"
