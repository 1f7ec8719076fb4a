"""Zak-OTFS delay-Doppler pulse shaping and link simulation."""

__version__ = "0.1.0"
