"""
Background workers for batched objective evaluation
"""

from .scan_worker import ScanWorker

__all__ = ['ScanWorker']
