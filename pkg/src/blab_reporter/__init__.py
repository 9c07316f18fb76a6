"""BLAB Reporter: data-to-text robot journalist for the Blue Amazon."""
from .pipeline import Report, ReportPipeline

__version__ = "0.1.0"
__all__ = ["Report", "ReportPipeline"]
