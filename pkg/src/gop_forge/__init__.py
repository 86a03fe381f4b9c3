"""Pronunciation scoring with WFST forced alignment and OOV-free lexicons."""

__version__ = "0.1.0"

from .errors import GopForgeError  # noqa: F401
from .lexicon import Lexicon, LexiconEntry, PhoneInventory, Vocabulary  # noqa: F401
from .pipeline import PipelineConfig, ScoringEngine, run_batch  # noqa: F401
