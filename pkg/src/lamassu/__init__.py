"""Block-oriented convergent encryption with in-band, crash-consistent metadata."""

from .crypto import SecretKeyPair
from .engine import IntegrityMode, LamassuFile, RecoveryReport, VerifyReport, get_logical_size
from .errors import (CrashDetectedError, DataIntegrityError, LamassuError, MetadataIntegrityError,
                     NotFoundError, SimulatedCrash)
from .keystore import KeyStore
from .layout import LayoutParams, encrypted_size, min_overhead_ratio
from .store import DedupStatsStore, DirectoryStore, MemoryStore, dedup_report

__all__ = [
    "CrashDetectedError", "DataIntegrityError", "DedupStatsStore", "DirectoryStore", "IntegrityMode",
    "KeyStore", "LamassuError", "LamassuFile", "LayoutParams", "MemoryStore", "MetadataIntegrityError",
    "NotFoundError", "RecoveryReport", "SecretKeyPair", "SimulatedCrash", "VerifyReport",
    "dedup_report", "encrypted_size", "get_logical_size", "min_overhead_ratio",
]
