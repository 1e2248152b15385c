"""
Core numerics for robust pulse synthesis
"""

from .system_checker import SystemChecker
from .record_store import RecordStore

__all__ = ['SystemChecker', 'RecordStore']
