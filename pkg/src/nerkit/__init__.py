"""Sequential multi-backend named entity recognition.

Documents go through processing blocks of NER models (native grammars and
gazetteers, or remote model servers); per-document results carry contexts
and an integrated summary, and a run produces aggregate statistics.
"""

from .categories import Category, normalize_category
from .errors import ConfigError, NerkitError
from .ingestion import DocumentRecord, load_extracted_record, load_plain_text
from .model import (ContextPolicy, EntityMention, ModelDescriptor, ProcessingBlock, RawMention,
                    RunSettings, StoreConnection, default_registry, load_settings, validate_mention)
from .pipeline import execute_run, run_block
from .results import DocumentResult, IntegratedSummary, ModelRunResult, RunStatistics

__version__ = "0.1.0"

__all__ = [
    "Category",
    "ConfigError",
    "ContextPolicy",
    "DocumentRecord",
    "DocumentResult",
    "EntityMention",
    "IntegratedSummary",
    "ModelDescriptor",
    "ModelRunResult",
    "NerkitError",
    "ProcessingBlock",
    "RawMention",
    "RunSettings",
    "RunStatistics",
    "StoreConnection",
    "default_registry",
    "execute_run",
    "load_extracted_record",
    "load_plain_text",
    "load_settings",
    "normalize_category",
    "run_block",
    "validate_mention",
]
