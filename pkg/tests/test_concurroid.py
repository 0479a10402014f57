"""Concurroid obligations, entanglement, and the constructed failure cases."""

import random

import pytest

from histrio.concurroid import (
    Transition,
    behaviorally_equal,
    check_concurroid,
    check_fork_join_closure,
    check_footprints,
    check_guarantee,
    check_locality,
    empty_concurroid,
    entangle,
)
from histrio.fmap import FrozenMap
from histrio.state import EMPTY_STATE, SubjState, realign_release
from histrio.structures import flatcombiner as fc
from histrio.structures import private_heap as pv
from histrio.structures import snapshot as sp
from histrio.structures import spinlock as lk
from histrio.structures import treiber as tb

ALL = [
    sp.concurroid(),
    pv.concurroid(),
    tb.concurroid(),
    lk.concurroid(),
    fc.concurroid(fc.stack_shape(3)),
]


@pytest.mark.parametrize("conc", ALL, ids=lambda c: c.name)
def test_all_obligations_pass(conc):
    rng = random.Random(2024)
    for rep in check_concurroid(conc, 120, rng):
        assert rep.ok, (rep.check, rep.subject, rep.violations[:3])


def test_identity_transition_always_present():
    for conc in ALL:
        assert "id" in conc.internals


def test_guarantee_catches_an_other_mutating_transition():
    def sampler(rng):
        w = pv.sample_state(rng)
        w2 = realign_release(w, FrozenMap({pv.LB: pv.Heap({pv.Loc(777): 1})}))
        return (w, w2)

    bad = Transition("evil", "internal", lambda w, w2: True, sampler)
    rep = check_guarantee(bad, 50, random.Random(0))
    assert not rep.ok


def test_locality_catches_an_absolute_self_reading_transition():
    def member(w, w2):
        # fires only from a completely empty self: not closed under framing
        return w.self_[pv.LB] == pv.EMPTY_HEAP and w == w2

    def sampler(rng):
        w = pv.initial_state()
        return (w, w)

    bad = Transition("absolute", "internal", member, sampler)
    rep = check_locality(bad, 80, random.Random(0), pv.sample_frame)
    assert not rep.ok


def test_footprints_catch_a_leaking_internal_transition():
    def sampler(rng):
        w = pv.sample_state(rng)
        grown = pv.Heap(w.self_[pv.LB].set(pv.Loc(888), 0))
        w2 = SubjState(w.self_.set(pv.LB, grown), w.joint, w.other)
        return (w, w2)

    bad = Transition("grow", "internal", lambda w, w2: True, sampler)

    class FakeConc:
        name = "fake"

        def all_transitions(self):
            return [bad]

    rep = check_footprints(FakeConc(), 40, random.Random(0))
    assert not rep.ok


def test_closure_fails_for_a_self_only_coherence():
    conc = pv.concurroid()
    broken = type(conc)(
        name="broken",
        labels=conc.labels,
        coherent=lambda w: pv.coherent(w) and len(w.self_[pv.LB]) == 0,
        internals=conc.internals,
        externals=conc.externals,
        sample_state=lambda rng: pv.initial_state(),
        sample_frame=pv.sample_frame,
    )
    rep = check_fork_join_closure(broken, 100, random.Random(1))
    assert not rep.ok


def test_entangle_requires_disjoint_labels():
    with pytest.raises(ValueError):
        entangle(pv.concurroid(), pv.concurroid())


def test_entangle_labels_and_coherence():
    ent = entangle(pv.concurroid(), sp.concurroid())
    assert ent.labels == {"pv", "sp"}
    rng = random.Random(5)
    for _ in range(40):
        w = ent.sample_state(rng)
        assert ent.coherent(w)
        assert not ent.coherent(w.restrict({"pv"}))


def test_entangle_lifts_transitions_with_idle_frames():
    ent = entangle(pv.concurroid(), sp.concurroid())
    rng = random.Random(6)
    wr = ent.internals["wr_x"]
    base = sp.concurroid().internals["wr_x"]
    for _ in range(40):
        drawn = base.sampler(rng)
        w_sp, w2_sp = drawn
        w_pv = pv.sample_state(rng)
        w = w_sp.merge_disjoint(w_pv)
        w2 = w2_sp.merge_disjoint(w_pv)
        assert wr.member(w, w2)
        # a simultaneous private write is not a pure snapshot step
        grown = pv.Heap(w_pv.self_[pv.LB].set(pv.Loc(11), 9))
        w2_bad = SubjState(
            w2.self_.set(pv.LB, grown), w2.joint, w2.other
        )
        assert not wr.member(w, w2_bad)


def test_empty_concurroid_is_the_unit():
    e = empty_concurroid()
    assert e.labels == frozenset()
    assert e.coherent(EMPTY_STATE)
    assert not e.coherent(pv.initial_state())
    rng = random.Random(7)
    ent = entangle(tb.concurroid(), e)
    assert behaviorally_equal(ent, tb.concurroid(), 40, rng)


def test_exchange_law():
    rng = random.Random(8)
    u, v, w = pv.concurroid(), sp.concurroid(), tb.concurroid()
    left = entangle(entangle(u, v), w)
    right = entangle(entangle(u, w), v)
    assert behaviorally_equal(left, right, 30, rng)
