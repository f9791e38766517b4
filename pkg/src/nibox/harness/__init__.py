"""Experiment runner, persistence, analysis and CLI."""
