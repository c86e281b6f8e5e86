"""smartpaste: infer the variables behind placeholders in pasted code."""

__version__ = "0.1.0"
