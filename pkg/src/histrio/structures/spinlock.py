"""A CAS-based spin-lock protecting a resource heap.

When the lock is free the resource heap sits in the joint part and
satisfies the client's resource invariant over the combined auxiliary
contribution; taking the lock hands the heap to the locking thread's
private section.  Unlocking carves the resource sub-heap back out of
the private section (the invariant determines its extent, so safety
stays monotone under self-enlargement) and may update the unlocker's
auxiliary contribution.

The self/other views reuse the componentwise triple carrier with an
always-empty id-set slot: (ids, mutex, contribution).  The shipped
instance guards a single register cell mirroring a set of ids.
"""

from __future__ import annotations

import random
from typing import Callable, Optional

from ..actions import ActionFamily, AtomicAction, Write, cas
from ..concurroid import Concurroid, Transition, identity_transition
from ..fmap import FrozenMap
from ..pcm import (
    EMPTY_HEAP,
    EMPTY_IDSET,
    NOT_OWN,
    OWN,
    Heap,
    IdSet,
    Loc,
    Triple,
    join,
)
from ..state import SubjState, validate
from . import private_heap as pv

LB = "lk"
LK = Loc(4001)
REG = Loc(4002)
HOME = frozenset([LB])
LOCK_HOME = frozenset([LB, pv.LB])

Inv = Callable[[object, Heap], bool]
Carve = Callable[[Heap], Optional[Heap]]


def register_inv(g: IdSet, h: Heap) -> bool:
    """Shipped resource invariant: one cell storing the combined id set."""
    return set(h.keys()) == {REG} and h[REG] == tuple(sorted(g.ids))


def register_carve(h: Heap) -> Optional[Heap]:
    if REG not in h:
        return None
    return Heap({REG: h[REG]})


def _views(w: SubjState):
    s, o = w.self_[LB], w.other[LB]
    if not (isinstance(s, Triple) and isinstance(o, Triple)):
        return None
    return s, o


def coherent_for(inv: Inv):
    def coherent(w: SubjState) -> bool:
        if set(w.labels()) != {LB} or not validate(w):
            return False
        vs = _views(w)
        if vs is None:
            return False
        s, o = vs
        jh = w.joint[LB]
        if not isinstance(jh, Heap) or LK not in jh or not isinstance(jh[LK], bool):
            return False
        h = Heap(jh.remove(LK))
        mx = join(s.mx, o.mx)
        g = join(s.aux, o.aux)
        if mx is None or g is None:
            return False
        if jh[LK]:
            return h == EMPTY_HEAP and mx is OWN
        return mx is NOT_OWN and inv(g, h)

    return coherent


def _take_member(w, w2, h: Heap) -> bool:
    """Locking: the resource heap leaves the joint part (release side)."""
    vs, vs2 = _views(w), _views(w2)
    if vs is None or vs2 is None or w.other != w2.other:
        return False
    s, _ = vs
    s2, _ = vs2
    jh, jh2 = w.joint[LB], w2.joint[LB]
    return (
        jh.get(LK) is False
        and jh2 == Heap({LK: True})
        and Heap(jh.remove(LK)) == h
        and s2 == Triple(s.ids, OWN, s.aux)
        and s.mx is NOT_OWN
    )


def _give_back_member_for(inv: Inv):
    def member(w, w2, h: Heap) -> bool:
        """Unlocking: the joint part re-acquires a heap satisfying ``inv``."""
        vs, vs2 = _views(w), _views(w2)
        if vs is None or vs2 is None or w.other != w2.other:
            return False
        s, o = vs
        s2, _ = vs2
        if not (s.mx is OWN and s2.mx is NOT_OWN and s2.ids == s.ids):
            return False
        if w.joint[LB] != Heap({LK: True}):
            return False
        if w2.joint[LB] != Heap(Heap({LK: False}).merge_disjoint(h)):
            return False
        g2 = join(s2.aux, o.aux)
        return g2 is not None and inv(g2, h)

    return member


# ---------------------------------------------------------------------------
# Actions (over private heaps entangled with the lock)
# ---------------------------------------------------------------------------

def trylock(inv: Inv = register_inv) -> AtomicAction:
    def safe(w):
        return (
            LB in w.self_
            and pv.LB in w.self_
            and coherent_for(inv)(w.restrict(HOME))
            and pv.coherent(w.restrict(frozenset([pv.LB])))
        )

    def step(w, ctx):
        jh = w.joint[LB]
        if jh[LK]:
            return w, False, ctx
        h = Heap(jh.remove(LK))
        s = w.self_[LB]
        merged = w.self_[pv.LB].merge_disjoint(h)
        return (
            SubjState(
                w.self_.set(LB, Triple(s.ids, OWN, s.aux)).set(pv.LB, Heap(merged)),
                w.joint.set(LB, Heap({LK: True})),
                w.other,
            ),
            True,
            ctx,
        )

    return AtomicAction(
        "trylock", LOCK_HOME, "bool", safe, step, "xchg:pv.acquire|lk.lock",
        cas(LK, False, True),
    )


def unlock(g2, inv: Inv = register_inv, carve: Carve = register_carve) -> AtomicAction:
    """Release the lock; the invariant's carver picks the resource sub-heap
    out of the private section, and the contribution becomes ``g2``."""

    def safe(w):
        if not (LB in w.self_ and pv.LB in w.self_):
            return False
        s, o = w.self_[LB], w.other[LB]
        if not (isinstance(s, Triple) and s.mx is OWN):
            return False
        h = carve(w.self_[pv.LB])
        if h is None:
            return False
        got = join(g2, o.aux)
        return got is not None and inv(got, h)

    def step(w, ctx):
        s = w.self_[LB]
        h = carve(w.self_[pv.LB])
        rest = Heap({loc: v for loc, v in w.self_[pv.LB].items() if loc not in h})
        return (
            SubjState(
                w.self_.set(LB, Triple(s.ids, NOT_OWN, g2)).set(pv.LB, rest),
                w.joint.set(LB, Heap(Heap({LK: False}).merge_disjoint(h))),
                w.other,
            ),
            (),
            ctx,
        )

    return AtomicAction(
        "unlock", LOCK_HOME, "unit", safe, step, "xchg:lk.unlock|pv.release",
        Write(LK, False),
    )


# ---------------------------------------------------------------------------
# Construction and sampling
# ---------------------------------------------------------------------------

def initial_state(g: IdSet = EMPTY_IDSET) -> SubjState:
    return SubjState(
        FrozenMap({LB: Triple(EMPTY_IDSET, NOT_OWN, g)}),
        FrozenMap({LB: Heap({LK: False, REG: tuple(sorted(g.ids))})}),
        FrozenMap({LB: Triple(EMPTY_IDSET, NOT_OWN, EMPTY_IDSET)}),
    )


def sample_state(rng: random.Random) -> SubjState:
    ids = frozenset(rng.sample(range(6), rng.randint(0, 3)))
    mine = frozenset(i for i in ids if rng.random() < 0.5)
    locked = rng.random() < 0.4
    if locked:
        own_self = rng.random() < 0.5
        s = Triple(EMPTY_IDSET, OWN if own_self else NOT_OWN, IdSet(mine))
        o = Triple(EMPTY_IDSET, NOT_OWN if own_self else OWN, IdSet(ids - mine))
        jh = Heap({LK: True})
    else:
        s = Triple(EMPTY_IDSET, NOT_OWN, IdSet(mine))
        o = Triple(EMPTY_IDSET, NOT_OWN, IdSet(ids - mine))
        jh = Heap({LK: False, REG: tuple(sorted(ids))})
    return SubjState(FrozenMap({LB: s}), FrozenMap({LB: jh}), FrozenMap({LB: o}))


def sample_frame(rng: random.Random) -> FrozenMap:
    unit = Triple(EMPTY_IDSET, NOT_OWN, EMPTY_IDSET)
    if rng.random() < 0.5:
        return FrozenMap({LB: unit})
    return FrozenMap({LB: Triple(IdSet.of(rng.randint(10, 14)), NOT_OWN, EMPTY_IDSET)})


def concurroid(inv: Inv = register_inv) -> Concurroid:
    def take_sampler(rng):
        for _ in range(16):
            w = sample_state(rng)
            if not w.joint[LB][LK] and w.self_[LB].mx is NOT_OWN:
                h = Heap(w.joint[LB].remove(LK))
                s = w.self_[LB]
                w2 = SubjState(
                    w.self_.set(LB, Triple(s.ids, OWN, s.aux)),
                    w.joint.set(LB, Heap({LK: True})),
                    w.other,
                )
                return (w, w2, h)
        return None

    def back_sampler(rng):
        drawn = take_sampler(rng)
        if drawn is None:
            return None
        w, w2, h = drawn
        return (w2, w, h)

    give_back = Transition("lk.unlock", "acquire", _give_back_member_for(inv), back_sampler)
    take = Transition("lk.lock", "release", _take_member, take_sampler)
    return Concurroid(
        name="spin-lock",
        labels=HOME,
        coherent=coherent_for(inv),
        internals={"id": identity_transition(sample_state)},
        externals=[(give_back, take)],
        sample_state=sample_state,
        sample_frame=sample_frame,
    )


def action_families() -> list[ActionFamily]:
    from ..concurroid import entangle

    ent = entangle(pv.concurroid(), concurroid())

    def entangled(rng, locked: bool):
        for _ in range(64):
            w = sample_state(rng)
            if w.joint[LB][LK] != locked:
                continue
            if locked and w.self_[LB].mx is not OWN:
                continue
            hp = pv.sample_state(rng)
            hs = hp.self_[pv.LB]
            if locked:
                g = join(w.self_[LB].aux, w.other[LB].aux)
                hs = Heap(hs.set(REG, tuple(sorted(g.ids))))
            return SubjState(
                w.self_.set(pv.LB, hs),
                w.joint.set(pv.LB, EMPTY_HEAP),
                w.other.set(pv.LB, hp.other[pv.LB]),
            )
        return None

    def sample_trylock(rng):
        w = entangled(rng, locked=rng.random() < 0.3)
        while w is None:
            w = entangled(rng, locked=False)
        return trylock(), w

    def sample_unlock(rng):
        while True:
            w = entangled(rng, locked=True)
            if w is not None:
                g2 = w.self_[LB].aux
                total = join(g2, w.other[LB].aux)
                hs = Heap(w.self_[pv.LB].set(REG, tuple(sorted(total.ids))))
                w = SubjState(w.self_.set(pv.LB, hs), w.joint, w.other)
                return unlock(g2), w

    def bad_unlock(rng):
        while True:
            w = entangled(rng, locked=False)
            if w is not None:
                return unlock(EMPTY_IDSET), w

    return [
        ActionFamily("trylock", ent, sample_trylock),
        ActionFamily("unlock", ent, sample_unlock, bad_unlock),
    ]
