"""Concurroids: labeled transition systems governing concurrent structures.

A concurroid is a quadruple of labels, a coherence predicate (the set of
admissible states), internal transitions, and paired acquire/release
external transitions used for heap ownership transfer.  The metatheory
obligations — guarantee, locality, footprint discipline, fork-join
closure, and rely-as-transposed-guarantee — are implemented here as
sampled property checks, and ``entangle`` builds the composite systems
the scenarios run under.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .fmap import EMPTY_MAP, FrozenMap
from .state import (
    EMPTY_STATE,
    StateError,
    SubjState,
    flatten,
    realign_acquire,
    realign_release,
    transpose,
    validate,
)


@dataclass
class Transition:
    """One transition of a concurroid.

    ``member`` decides membership: for internal transitions it takes
    ``(w, w')``; for acquire/release transitions it takes ``(w, w', h)``
    where ``h`` is the transferred heap.  ``sampler`` draws random
    member pairs (or triples) for the property checks; transitions used
    only through entanglement may omit it.
    """

    name: str
    kind: str  # "internal" | "acquire" | "release"
    member: Callable
    sampler: Optional[Callable[[random.Random], tuple]] = None

    def holds(self, w, w2, h=None) -> bool:
        if self.kind == "internal":
            return self.member(w, w2)
        return self.member(w, w2, h)


def identity_transition(sample_state=None) -> Transition:
    sampler = None
    if sample_state is not None:
        def sampler(rng):
            w = sample_state(rng)
            return (w, w)
    return Transition("id", "internal", lambda w, w2: w == w2, sampler)


@dataclass
class Concurroid:
    name: str
    labels: frozenset
    coherent: Callable[[SubjState], bool]
    internals: dict[str, Transition]
    externals: list[tuple[Optional[Transition], Optional[Transition]]]
    sample_state: Optional[Callable[[random.Random], SubjState]] = None
    sample_frame: Optional[Callable[[random.Random], FrozenMap]] = None

    def find(self, name: str) -> Optional[Transition]:
        t = self.internals.get(name)
        if t is not None:
            return t
        for alpha, rho in self.externals:
            if alpha is not None and alpha.name == name:
                return alpha
            if rho is not None and rho.name == name:
                return rho
        return None

    def all_transitions(self) -> list[Transition]:
        out = list(self.internals.values())
        for alpha, rho in self.externals:
            if alpha is not None:
                out.append(alpha)
            if rho is not None:
                out.append(rho)
        return out


# ---------------------------------------------------------------------------
# Heap transfer inference
# ---------------------------------------------------------------------------

def transferred_heap(t: Transition, w: SubjState, w2: SubjState) -> Optional:
    """Infer the heap ``h`` moved by an external transition step.

    Acquire transitions grow the flattened footprint by ``dom h`` (the
    acquired cells appear with their post-state contents); release
    transitions shrink it (the released cells leave with their
    pre-state contents).
    """
    f1, f2 = flatten(w), flatten(w2)
    if f1 is None or f2 is None:
        return None
    if t.kind == "acquire":
        new = {loc: f2[loc] for loc in f2 if loc not in f1}
        from .pcm import Heap

        return Heap(new)
    if t.kind == "release":
        gone = {loc: f1[loc] for loc in f1 if loc not in f2}
        from .pcm import Heap

        return Heap(gone)
    return None


def step_in_transition(t: Transition, w: SubjState, w2: SubjState) -> bool:
    """Membership test covering both internal and external transitions."""
    if t.kind == "internal":
        return t.member(w, w2)
    h = transferred_heap(t, w, w2)
    return h is not None and t.member(w, w2, h)


# ---------------------------------------------------------------------------
# Property checks
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    check: str
    subject: str
    samples: int = 0
    vacuous: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str):
        if len(self.violations) < 25:
            self.violations.append(msg)

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "subject": self.subject,
            "samples": self.samples,
            "vacuous": self.vacuous,
            "violations": list(self.violations),
            "ok": self.ok,
        }


def _draw(t: Transition, rng) -> Optional[tuple]:
    if t.sampler is None:
        return None
    drawn = t.sampler(rng)
    if drawn is None:
        return None
    if len(drawn) == 2:
        return (drawn[0], drawn[1], None)
    return drawn


def check_guarantee(t: Transition, n: int, rng: random.Random) -> CheckReport:
    """Sampled steps never touch the other component."""
    rep = CheckReport("guarantee", t.name)
    for _ in range(n):
        drawn = _draw(t, rng)
        if drawn is None:
            rep.vacuous += 1
            continue
        w, w2, _ = drawn
        rep.samples += 1
        if w.other != w2.other:
            rep.add(f"{t.name}: other changed: {w.render()} -> {w2.render()}")
    return rep


def check_rely(t: Transition, n: int, rng: random.Random) -> CheckReport:
    """The transposed step (the environment's view) never touches self."""
    rep = CheckReport("rely", t.name)
    for _ in range(n):
        drawn = _draw(t, rng)
        if drawn is None:
            rep.vacuous += 1
            continue
        w, w2, _ = drawn
        rep.samples += 1
        if transpose(w).self_ != transpose(w2).self_:
            rep.add(f"{t.name}: transposed step changed self")
    return rep


def check_locality(
    t: Transition, n: int, rng: random.Random, sample_frame: Callable
) -> CheckReport:
    """Steps valid under an other-side frame stay valid with it on the self side."""
    rep = CheckReport("locality", t.name)
    for _ in range(n):
        drawn = _draw(t, rng)
        if drawn is None:
            rep.vacuous += 1
            continue
        w, w2, h = drawn
        f = sample_frame(rng)
        try:
            wr, w2r = realign_release(w, f), realign_release(w2, f)
        except StateError:
            rep.vacuous += 1
            continue
        if not t.holds(wr, w2r, h):
            rep.vacuous += 1
            continue
        rep.samples += 1
        try:
            wa, w2a = realign_acquire(w, f), realign_acquire(w2, f)
        except StateError:
            rep.add(f"{t.name}: self-side realignment undefined for frame {f!r}")
            continue
        if not t.holds(wa, w2a, h):
            rep.add(f"{t.name}: not closed under frame {f!r}")
    return rep


def check_footprints(c: Concurroid, n: int, rng: random.Random) -> CheckReport:
    """Internal steps preserve the flattened heap domain; externals move it."""
    rep = CheckReport("footprints", c.name)
    for t in c.all_transitions():
        if t.sampler is None:
            continue
        for _ in range(n):
            drawn = _draw(t, rng)
            if drawn is None:
                rep.vacuous += 1
                continue
            w, w2, h = drawn
            rep.samples += 1
            f1, f2 = flatten(w), flatten(w2)
            if f1 is None or f2 is None:
                rep.add(f"{t.name}: state heaps overlap")
                continue
            if t.kind == "internal":
                if f1.keys() != f2.keys():
                    rep.add(f"{t.name}: internal step changed heap domain")
            elif t.kind == "acquire":
                if h is None or (f1.keys() | h.keys()) != f2.keys() or (
                    f1.keys() & h.keys()
                ):
                    rep.add(f"{t.name}: footprint not extended by dom(h)")
            elif t.kind == "release":
                if h is None or (f2.keys() | h.keys()) != f1.keys() or (
                    f2.keys() & h.keys()
                ):
                    rep.add(f"{t.name}: footprint not reduced by dom(h)")
    return rep


def check_fork_join_closure(c: Concurroid, n: int, rng: random.Random) -> CheckReport:
    """Coherence survives moving a PCM-map between self and other."""
    rep = CheckReport("fork-join-closure", c.name)
    for _ in range(n):
        w = c.sample_state(rng)
        f = c.sample_frame(rng)
        rep.samples += 1
        try:
            left = c.coherent(realign_acquire(w, f))
        except StateError:
            left = False
        try:
            right = c.coherent(realign_release(w, f))
        except StateError:
            right = False
        if left != right:
            rep.add(f"closure broken by frame {f!r} (self:{left} other:{right})")
    return rep


def check_post_state_coherence(c: Concurroid, n: int, rng: random.Random) -> CheckReport:
    """Sampled transition steps land in coherent states."""
    rep = CheckReport("post-coherence", c.name)
    for t in c.all_transitions():
        if t.sampler is None:
            continue
        for _ in range(max(1, n // 4)):
            drawn = _draw(t, rng)
            if drawn is None:
                rep.vacuous += 1
                continue
            w, w2, _ = drawn
            rep.samples += 1
            if not (validate(w2) and c.coherent(w2)):
                rep.add(f"{t.name}: post-state incoherent")
    return rep


def check_concurroid(c: Concurroid, n: int, rng: random.Random) -> list[CheckReport]:
    """Run the full obligation suite for one concurroid."""
    reports = []
    for t in c.all_transitions():
        if t.sampler is None:
            continue
        reports.append(check_guarantee(t, n, rng))
        reports.append(check_rely(t, n, rng))
        reports.append(check_locality(t, n, rng, c.sample_frame))
    reports.append(check_footprints(c, n, rng))
    reports.append(check_fork_join_closure(c, n, rng))
    reports.append(check_post_state_coherence(c, n, rng))
    return reports


# ---------------------------------------------------------------------------
# Entanglement
# ---------------------------------------------------------------------------

def _lift_internal(t: Transition, side_labels, other_labels, coherent) -> Transition:
    def member(w, w2):
        if w.labels() != w2.labels():
            return False
        if w.restrict(other_labels) != w2.restrict(other_labels):
            return False
        return t.member(w.restrict(side_labels), w2.restrict(side_labels))

    return Transition(t.name, "internal", member)


def _lift_external(t: Transition, side_labels, other_labels) -> Transition:
    def member(w, w2, h):
        if w.restrict(other_labels) != w2.restrict(other_labels):
            return False
        return t.member(w.restrict(side_labels), w2.restrict(side_labels), h)

    return Transition(t.name, t.kind, member)


def _exchange(alpha: Transition, a_labels, rho: Transition, r_labels) -> Transition:
    """Simultaneous acquire on one side and release on the other."""

    def member(w, w2):
        wa, wa2 = w.restrict(a_labels), w2.restrict(a_labels)
        wr, wr2 = w.restrict(r_labels), w2.restrict(r_labels)
        h = transferred_heap(alpha, wa, wa2)
        if h is None or not h:
            return False
        return alpha.member(wa, wa2, h) and rho.member(wr, wr2, h)

    return Transition(f"xchg:{alpha.name}|{rho.name}", "internal", member)


def entangle(u: Concurroid, v: Concurroid) -> Concurroid:
    """``u ⋊ v``: compose two concurroids over disjoint labels.

    Internal transitions let either side step while the other is idle,
    plus every heap-exchange interconnection between an acquire of one
    side and a release of the other.  The externals of ``u`` stay open;
    those of ``v`` are shut down.
    """
    if u.labels & v.labels:
        raise ValueError(f"label overlap: {u.labels & v.labels}")
    labels = u.labels | v.labels

    def coherent(w: SubjState) -> bool:
        if set(w.labels()) != labels:
            return False
        return (
            u.coherent(w.restrict(u.labels))
            and v.coherent(w.restrict(v.labels))
            and flatten(w) is not None
        )

    internals: dict[str, Transition] = {}
    for name, t in u.internals.items():
        internals[name] = _lift_internal(t, u.labels, v.labels, coherent)
    for name, t in v.internals.items():
        if name == "id":
            continue
        internals[name] = _lift_internal(t, v.labels, u.labels, coherent)
    internals["id"] = identity_transition()
    internals["id"].sampler = None

    for ua, _ur in u.externals:
        for _va, vr in v.externals:
            if ua is not None and vr is not None:
                t = _exchange(ua, u.labels, vr, v.labels)
                internals[t.name] = t
    for va, _vr in v.externals:
        for _ua, ur in u.externals:
            if va is not None and ur is not None:
                t = _exchange(va, v.labels, ur, u.labels)
                internals[t.name] = t

    externals = []
    for ua, ur in u.externals:
        lifted_a = _lift_external(ua, u.labels, v.labels) if ua else None
        lifted_r = _lift_external(ur, u.labels, v.labels) if ur else None
        externals.append((lifted_a, lifted_r))

    sample_state = None
    if u.sample_state and v.sample_state:
        def sample_state(rng, _u=u, _v=v):
            for _ in range(64):
                w = _u.sample_state(rng).merge_disjoint(_v.sample_state(rng))
                if w is not None and flatten(w) is not None:
                    return w
            raise RuntimeError("could not sample disjoint entangled state")

    sample_frame = None
    if u.sample_frame and v.sample_frame:
        def sample_frame(rng, _u=u, _v=v):
            f = _u.sample_frame(rng).merge_disjoint(_v.sample_frame(rng))
            return f if f is not None else EMPTY_MAP

    return Concurroid(
        name=f"{u.name}><{v.name}",
        labels=labels,
        coherent=coherent,
        internals=internals,
        externals=externals,
        sample_state=sample_state,
        sample_frame=sample_frame,
    )


def empty_concurroid() -> Concurroid:
    """The right unit of entanglement: no labels, only the empty state."""
    def sample_state(rng):
        return EMPTY_STATE

    def sample_frame(rng):
        return EMPTY_MAP

    ident = identity_transition(sample_state)
    return Concurroid(
        name="empty",
        labels=frozenset(),
        coherent=lambda w: w == EMPTY_STATE,
        internals={"id": ident},
        externals=[],
        sample_state=sample_state,
        sample_frame=sample_frame,
    )


def behaviorally_equal(c1: Concurroid, c2: Concurroid, n: int, rng: random.Random) -> bool:
    """Structural equality up to sampling: same labels, coherence verdicts,
    and transition memberships on states drawn from either side."""
    if c1.labels != c2.labels:
        return False
    names1 = {t.name for t in c1.all_transitions()}
    names2 = {t.name for t in c2.all_transitions()}
    if names1 != names2:
        return False
    for sampler in (c1.sample_state, c2.sample_state):
        if sampler is None:
            continue
        for _ in range(n):
            w = sampler(rng)
            if c1.coherent(w) != c2.coherent(w):
                return False
    for src, dst in ((c1, c2), (c2, c1)):
        for t in src.all_transitions():
            if t.sampler is None:
                continue
            t_dst = dst.find(t.name)
            for _ in range(n):
                drawn = _draw(t, rng)
                if drawn is None:
                    continue
                w, w2, h = drawn
                if not t_dst.holds(w, w2, h):
                    return False
    return True
