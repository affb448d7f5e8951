"""Attribute-guided virtual try-on on procedural silhouette masks."""

__version__ = "0.1.0"
