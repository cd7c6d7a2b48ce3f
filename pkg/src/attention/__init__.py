"""Spanning-influence attention and modality fusion."""
