"""Multilingual web-corpus preparation: ingest, clean, tag, filter, deduplicate, audit."""

__version__ = "0.1.0"
