"""remb_exporter: frozen-transformer [CLS] vectors -> REMB embedding stores."""

__version__ = "0.1.0"

from .export import ExporterConfig, ExporterError, ExportSummary, export, write_remb

__all__ = ["__version__", "ExporterConfig", "ExporterError", "ExportSummary", "export", "write_remb"]
