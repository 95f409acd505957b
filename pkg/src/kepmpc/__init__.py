"""Two-party secure kidney exchange over secret-shared medical records."""

__version__ = "0.1.0"
