"""Model host: HTTP inference service for question-synthesis backends."""

__version__ = "0.1.0"
