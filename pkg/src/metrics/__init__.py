"""Automatic evaluation metrics and the evaluation harness."""
