"""Shared utilities: errors, seeding, logging."""
