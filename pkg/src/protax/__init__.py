"""Protocol property taxonomy, instrumentation and model generation."""

__version__ = "0.1.0"
