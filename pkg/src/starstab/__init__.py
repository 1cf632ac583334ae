"""Stability of non-rotating gaseous stars via the turning point principle."""
