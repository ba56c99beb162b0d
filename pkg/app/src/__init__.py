"""Supervisory heat-pump control application package."""
