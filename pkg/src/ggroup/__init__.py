"""Group-computation grammar engine: generation and parsing as rewriting."""

__version__ = "0.1.0"
