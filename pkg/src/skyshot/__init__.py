"""Occlusion-aware camera trajectory planning for filming a moving actor."""

__version__ = "0.1.0"
