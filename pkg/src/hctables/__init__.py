"""Higher Criticism for comparing two large frequency tables."""

__version__ = "0.1.0"
