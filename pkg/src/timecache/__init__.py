"""Trace-driven cache hierarchy simulator with the TimeCache defense."""

__version__ = "0.1.0"
