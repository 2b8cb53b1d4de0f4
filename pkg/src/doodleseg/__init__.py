"""Doodle-prompted dual-input segmentation: engine, model, pipeline, service."""

__version__ = "0.1.0"
