"""Desk-scale bimanual active-perception manipulation benchmark."""

__version__ = "0.1.0"
