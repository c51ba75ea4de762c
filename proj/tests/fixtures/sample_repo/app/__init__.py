"""Command line application for the tidewater record pipeline."""

__version__ = "0.3.1"
