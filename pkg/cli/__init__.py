"""
Command-line front end
"""

from .app import PulseForgeApp, run

__all__ = ['PulseForgeApp', 'run']
