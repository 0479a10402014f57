"""The five shipped concurrent structures.

Each module defines a concurroid (labels, coherence, transitions), the
atomic actions operating on it, the thread procedures built from those
actions, and samplers for the metatheory property checks.
"""

from . import flatcombiner, private_heap, snapshot, spinlock, treiber  # noqa: F401

__all__ = ["snapshot", "private_heap", "treiber", "spinlock", "flatcombiner"]
