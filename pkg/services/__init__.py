"""Numerical services; each exposes static operations over the models package."""
