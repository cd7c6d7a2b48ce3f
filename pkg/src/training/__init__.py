"""Contrastive curriculum training and gradient verification."""
