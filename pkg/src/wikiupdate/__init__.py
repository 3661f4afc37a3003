"""Distantly supervised article-update data, edit-script codec and update-aware metrics."""

__version__ = "0.1.0"
