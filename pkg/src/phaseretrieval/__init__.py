"""Phase transitions of phase retrieval with structured sensing matrices."""

__version__ = "0.1.0"
