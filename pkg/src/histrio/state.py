"""Subjective states and the realignment algebra.

A subjective state is a per-thread view ``⟨self | joint | other⟩`` over
labeled components: ``self`` holds the thread's privately owned PCM
elements, ``other`` the environment's, and ``joint`` the shared part
(heaps plus, for the flat combiner, its auxiliary slot array).  The
three maps always carry the same labels.

Fork and join recombine the self/other axis: a parent splitting its
self as ``a ∘ b`` spawns children ``⟨a | j | b ∘ o⟩`` and
``⟨b | j | a ∘ o⟩``; joining inverts this, recovering the unique common
environment part.  Framing moves a PCM-map between the two sides
(``◁`` into self, ``▷`` into other).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .fmap import EMPTY_MAP, FrozenMap
from .pcm import (
    EMPTY_HEAP,
    Heap,
    Triple,
    map_pointwise_join,
    map_subtract,
    render,
    unit_map_like,
)


class StateError(ValueError):
    """A structurally invalid state operation (bad split, no common env...)."""


@dataclass(frozen=True)
class SubjState:
    self_: FrozenMap  # label -> PCM element
    joint: FrozenMap  # label -> arbitrary (heap, or (heap, aux-array))
    other: FrozenMap  # label -> PCM element

    def labels(self):
        return self.self_.keys()

    def restrict(self, labels) -> "SubjState":
        return SubjState(
            self.self_.restrict(labels),
            self.joint.restrict(labels),
            self.other.restrict(labels),
        )

    def without(self, labels) -> "SubjState":
        return SubjState(
            self.self_.without(labels),
            self.joint.without(labels),
            self.other.without(labels),
        )

    def merge_disjoint(self, w: "SubjState") -> Optional["SubjState"]:
        s = self.self_.merge_disjoint(w.self_)
        j = self.joint.merge_disjoint(w.joint)
        o = self.other.merge_disjoint(w.other)
        if s is None or j is None or o is None:
            return None
        return SubjState(s, j, o)

    def render(self) -> str:
        parts = []
        for lbl in sorted(self.self_.keys()):
            parts.append(
                f"{lbl}: <{render(self.self_[lbl])} | "
                f"{render(self.joint[lbl])} | {render(self.other[lbl])}>"
            )
        return "; ".join(parts) if parts else "<empty>"


EMPTY_STATE = SubjState(EMPTY_MAP, EMPTY_MAP, EMPTY_MAP)


def heaps_of(value) -> list[Heap]:
    """All heaps stored inside a component value (recursing into tuples)."""
    if isinstance(value, Heap):
        return [value]
    if isinstance(value, tuple):
        out = []
        for v in value:
            out.extend(heaps_of(v))
        return out
    if isinstance(value, Triple):
        return heaps_of(value.aux)
    return []


def flatten(w: SubjState) -> Optional[Heap]:
    """Disjoint union of every heap in ``w``; ``None`` on overlap."""
    acc = EMPTY_HEAP
    for m in (w.self_, w.joint, w.other):
        for v in m.values():
            for h in heaps_of(v):
                merged = acc.merge_disjoint(h)
                if merged is None:
                    return None
                acc = Heap(merged)
    return acc


def validate(w: SubjState) -> bool:
    """Equal label domains, ``self ∘ other`` defined, heaps disjoint."""
    if not (w.self_.keys() == w.joint.keys() == w.other.keys()):
        return False
    try:
        if map_pointwise_join(w.self_, w.other) is None:
            return False
    except TypeError:
        return False
    return flatten(w) is not None


def transpose(w: SubjState) -> SubjState:
    """Swap the self and other components: the environment's view."""
    return SubjState(w.other, w.joint, w.self_)


def realign_acquire(w: SubjState, t: FrozenMap) -> SubjState:
    """``w ◁ t``: join the PCM-map ``t`` into the self component."""
    s = map_pointwise_join(t, w.self_)
    if s is None:
        raise StateError(f"realign_acquire: join undefined for {t!r}")
    return SubjState(s, w.joint, w.other)


def realign_release(w: SubjState, t: FrozenMap) -> SubjState:
    """``w ▷ t``: join the PCM-map ``t`` into the other component."""
    o = map_pointwise_join(t, w.other)
    if o is None:
        raise StateError(f"realign_release: join undefined for {t!r}")
    return SubjState(w.self_, w.joint, o)


def subjective_split(
    w: SubjState, a: FrozenMap, b: FrozenMap
) -> tuple[SubjState, SubjState]:
    """Fork: split ``self == a ∘ b`` into two sibling views."""
    recombined = map_pointwise_join(a, b)
    if recombined is None or recombined != w.self_:
        raise StateError(
            f"split directive does not decompose self: {a!r} ∘ {b!r} != {w.self_!r}"
        )
    o1 = map_pointwise_join(b, w.other)
    o2 = map_pointwise_join(a, w.other)
    if o1 is None or o2 is None:
        raise StateError("split: sibling other-view join undefined")
    c1 = SubjState(a, w.joint, o1)
    c2 = SubjState(b, w.joint, o2)
    if not (validate(c1) and validate(c2)):
        raise StateError("split produced an invalid child view")
    return c1, c2


def subjective_join(c1: SubjState, c2: SubjState) -> SubjState:
    """Join two sibling views back into the parent view.

    Requires equal joints and a common environment part ``c`` with
    ``other(c1) == self(c2) ∘ c`` and ``other(c2) == self(c1) ∘ c``;
    uniqueness of ``c`` follows from cancellativity of the carriers.
    """
    if c1.joint != c2.joint:
        raise StateError("join: sibling joints differ")
    c = map_subtract(c1.other, c2.self_)
    c_alt = map_subtract(c2.other, c1.self_)
    if c is None or c_alt is None or c != c_alt:
        raise StateError(
            f"join: no common environment part (got {c!r} vs {c_alt!r})"
        )
    s = map_pointwise_join(c1.self_, c2.self_)
    if s is None:
        raise StateError("join: sibling self components do not join")
    parent = SubjState(s, c1.joint, c)
    if not validate(parent):
        raise StateError("join produced an invalid parent view")
    return parent


def unit_frame(w: SubjState) -> FrozenMap:
    """The all-units PCM-map over ``w``'s labels."""
    return unit_map_like(w.self_)
