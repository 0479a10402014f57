"""histrio: an interleaving explorer and history-based spec checker for
fine-grained concurrent data structures.

The package models concurrent structures as labeled transition systems
over subjective states (per-thread self/joint/other views of
PCM-valued components), runs their operations under exhaustive or
randomized schedules, and checks timestamped-history specifications at
every step and return point.
"""

__version__ = "0.1.0"
