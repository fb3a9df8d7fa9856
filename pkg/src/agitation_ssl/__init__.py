"""Semi-supervised agitation-risk detection from in-home sensor activity."""

__version__ = "0.1.0"
