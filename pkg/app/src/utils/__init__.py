"""Time, logging, random-stream and report formatting helpers."""
