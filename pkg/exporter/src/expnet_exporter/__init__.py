"""Attention-trace exporter: classifier checkpoints in, trace files out."""

__version__ = "0.1.0"

from .datasets import AnnotatedExample, load_generic, load_hatexplain
from .export import ExportJob, ExportStats, export, export_example, load_checkpoint
from .synthetic import SynthSpec, generate_dataset, generate_synthetic
from .tracefile import ExportError, TraceRecord, check_record, write_manifest_from_traces, write_records

__all__ = [
    "__version__",
    "AnnotatedExample",
    "ExportError",
    "ExportJob",
    "ExportStats",
    "SynthSpec",
    "TraceRecord",
    "check_record",
    "export",
    "export_example",
    "generate_dataset",
    "generate_synthetic",
    "load_checkpoint",
    "load_generic",
    "load_hatexplain",
    "write_manifest_from_traces",
    "write_records",
]
