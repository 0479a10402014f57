"""Immutable finite maps with canonical ordering and cached hashes.

Every piece of program state in this package (heaps, histories, label
maps, environments) is a finite map that must be hashable, comparable,
and renderable in a deterministic order.  ``FrozenMap`` provides exactly
that; all mutators return fresh maps.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from typing import Any, Iterator, Optional, TypeVar

K = TypeVar("K")
V = TypeVar("V")


class FrozenMap(Mapping):
    """A hashable finite map.  Keys must be mutually orderable."""

    __slots__ = ("_d", "_hash")

    def __init__(self, items: Mapping | Iterable[tuple[Any, Any]] = ()):
        if isinstance(items, FrozenMap):
            self._d = items._d
            self._hash = items._hash
            return
        self._d = dict(items)
        self._hash = None

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self) -> Iterator:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __contains__(self, key) -> bool:
        return key in self._d

    def __eq__(self, other) -> bool:
        if isinstance(other, FrozenMap):
            return self._d == other._d
        return NotImplemented

    def __ne__(self, other) -> bool:
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(sorted(self._d.items(), key=lambda kv: kv[0])))
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}: {v!r}" for k, v in self.sorted_items())
        return "{" + inner + "}"

    def sorted_items(self) -> list[tuple[Any, Any]]:
        return sorted(self._d.items(), key=lambda kv: kv[0])

    def set(self, key, value) -> "FrozenMap":
        d = dict(self._d)
        d[key] = value
        return FrozenMap(d)

    def remove(self, key) -> "FrozenMap":
        d = dict(self._d)
        del d[key]
        return FrozenMap(d)

    def merge_disjoint(self, other: "FrozenMap") -> Optional["FrozenMap"]:
        """Union of two maps, or ``None`` when their key sets overlap."""
        if self._d.keys() & other._d.keys():
            return None
        d = dict(self._d)
        d.update(other._d)
        return FrozenMap(d)

    def restrict(self, keys) -> "FrozenMap":
        return FrozenMap({k: v for k, v in self._d.items() if k in keys})

    def without(self, keys) -> "FrozenMap":
        return FrozenMap({k: v for k, v in self._d.items() if k not in keys})


EMPTY_MAP = FrozenMap()
