"""
System capability checker used to size the worker pool
"""

import os
import sys
import platform

import numpy as np
import psutil

THREADS_ENV = 'PULSEFORGE_THREADS'


class SystemChecker:
    """Check system capabilities and recommend a worker count"""

    @staticmethod
    def check_system():
        """Check system capabilities"""
        info = {
            'python_version': sys.version.split()[0],
            'numpy_version': np.__version__,
            'platform': platform.platform(),
            'cpu_physical': 1,
            'cpu_logical': 1,
            'ram_available': 0.0,
            'recommended_workers': 1,
        }

        # Check CPUs
        info['cpu_physical'] = psutil.cpu_count(logical=False) or 1
        info['cpu_logical'] = psutil.cpu_count(logical=True) or info['cpu_physical']

        # Check RAM
        memory = psutil.virtual_memory()
        info['ram_available'] = memory.available / 1e9

        # One process per physical core, fewer when memory is tight; each
        # batched chunk holds a few hundred MB of trajectory buffers at most
        workers = info['cpu_physical']
        if info['ram_available'] < 2:
            workers = 1
        elif info['ram_available'] < 8:
            workers = min(workers, 2)
        info['recommended_workers'] = max(1, workers)

        return info

    @staticmethod
    def worker_count(requested=None):
        """
        Resolve the number of worker processes.

        Args:
            requested: Explicit count from the command line, if any.

        Returns:
            The explicit count, else PULSEFORGE_THREADS, else the recommendation,
            always capped by PULSEFORGE_THREADS when that variable is set.
        """
        cap = None
        raw = os.environ.get(THREADS_ENV)
        if raw:
            try:
                cap = max(1, int(raw))
            except ValueError:
                cap = None

        if requested is not None:
            count = max(1, int(requested))
        elif cap is not None:
            count = cap
        else:
            count = SystemChecker.check_system()['recommended_workers']

        if cap is not None:
            count = min(count, cap)
        return count
