"""capexport: embedding-based caption metric score exporter.

Emits wide-CSV score files (with provenance header comments and a
``<out>.meta.json`` side-file) in the schema consumed by the capeval toolkit.
"""

from .backends import DeterministicBackend, EmbeddingBackend, resolve_backend
from .export import (
    REFERENCE_FREE_METRICS,
    SUPPORTED_METRICS,
    ExportError,
    ExportJob,
    ExportResult,
    export_scores,
)

__version__ = "0.1.0"
