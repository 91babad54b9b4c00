"""patchtriage: rank, cluster, and behaviorally compare plausible repair patches."""
from __future__ import annotations

__version__ = "0.1.0"
