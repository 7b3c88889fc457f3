"""Pooled vision/text embedding exporter for grounded document-QA corpora."""

from .exporter import SEP, TEXT_MODES, ExportJob, ExportResult, export

__version__ = "0.1.0"
