"""Batch and streaming EEG hemispheric asymmetry analysis toolkit."""

__version__ = "0.1.0"
