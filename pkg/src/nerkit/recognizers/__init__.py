"""Native deterministic recognizers."""

from .backends import Resources, merge_mentions, run_native_backend
from .gazetteer import Gazetteer, gazetteer_annotate, load_gazetteer, load_gazetteers
from .patterns import recognize_numeric, recognize_temporal

__all__ = [
    "Gazetteer",
    "Resources",
    "gazetteer_annotate",
    "load_gazetteer",
    "load_gazetteers",
    "merge_mentions",
    "recognize_numeric",
    "recognize_temporal",
    "run_native_backend",
]
