"""Desk-scale numerical laboratory for the moment-map picture of Kähler–Einstein metrics."""

__version__ = "0.1.0"
