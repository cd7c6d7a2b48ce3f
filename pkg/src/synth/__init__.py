"""Synthetic e-passage corpus and curriculum levels."""
