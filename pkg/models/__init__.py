"""Pydantic models for measures, inner functions, circle sets, operators and run reports."""
