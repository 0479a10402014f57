"""Primitive atomics, CAS semantics, erasure, and action obligations."""

import random

import pytest

from histrio.actions import (
    ActionFamily,
    ActionSafetyError,
    AtomicAction,
    Read,
    Rmw,
    Skip,
    Write,
    cas,
    check_action_properties,
    erase,
    exec_primitive,
    run_atomic,
    StepCtx,
)
from histrio.pcm import Heap, Loc
from histrio.state import SubjState
from histrio.structures import flatcombiner as fc
from histrio.structures import private_heap as pv
from histrio.structures import snapshot as sp
from histrio.structures import spinlock as lk
from histrio.structures import treiber as tb


def test_cas_success_and_failure_semantics():
    prim = cas(Loc(1), "A", "B")
    heap = {Loc(1): "A"}
    res, _ = exec_primitive(prim, heap, 10)
    assert res is True and heap[Loc(1)] == "B"

    heap = {Loc(1): "C"}
    res, _ = exec_primitive(prim, heap, 10)
    assert res is False and heap[Loc(1)] == "C"  # failure leaves the cell alone

    heap = {Loc(1): "A"}
    res, _ = exec_primitive(cas(Loc(1), "A", "A"), heap, 10)
    assert res is True and heap[Loc(1)] == "A"


def test_exec_primitives():
    heap = {Loc(1): 5}
    assert exec_primitive(Read(Loc(1)), heap, 9) == (5, 9)
    exec_primitive(Write(Loc(1), 7), heap, 9)
    assert heap[Loc(1)] == 7
    assert exec_primitive(Skip(), heap, 9) == ((), 9)
    res, nxt = exec_primitive(Rmw(Loc(1), lambda v: v + 1, lambda v: v), heap, 9)
    assert (res, heap[Loc(1)], nxt) == (7, 8, 9)


def test_erasures_of_the_shipped_actions():
    assert erase(sp.read_x()) == Read(sp.X)
    a = tb.try_push(Loc(0), Loc(5))
    assert isinstance(erase(a), Rmw) and erase(a).loc == tb.SNT
    assert isinstance(erase(sp.write_x("B")), Rmw)
    assert erase(pv.write(Loc(3), 1)) == Write(Loc(3), 1)


def test_run_atomic_faults_outside_safety():
    w = pv.initial_state()
    with pytest.raises(ActionSafetyError):
        run_atomic(pv.write(Loc(9), 1), w, StepCtx(1))


def test_write_to_environment_owned_location_faults():
    w = pv.initial_state(other_heap=Heap({Loc(4): 0}))
    with pytest.raises(ActionSafetyError):
        run_atomic(pv.write(Loc(4), 1), w, StepCtx(1))
    with pytest.raises(ActionSafetyError):
        run_atomic(pv.dealloc(Loc(4)), w, StepCtx(1))


def test_alloc_yields_an_unused_location():
    w = pv.initial_state(Heap({Loc(2): 0}), Heap({Loc(3): 1}))
    w2, loc, ctx = run_atomic(pv.alloc(), w, StepCtx(4))
    assert loc == Loc(4) and ctx.next_loc == 5
    assert loc in w2.self_[pv.LB]


ALL_FAMILIES = (
    sp.action_families()
    + pv.action_families()
    + tb.action_families()
    + lk.action_families()
    + fc.action_families()
)


@pytest.mark.parametrize("fam", ALL_FAMILIES, ids=lambda f: f.name)
def test_action_obligations(fam):
    rng = random.Random(99)
    for rep in check_action_properties(fam, 120, rng):
        assert rep.ok, (rep.check, rep.violations[:3])


def test_result_leaking_auxiliary_state_fails_erasure():
    """An action whose result depends on erased history content."""

    def safe(w):
        return pv.LB in w.self_ and "tb" in w.self_

    def step(w, ctx):
        return w, len(w.self_["tb"].entries), ctx  # leaks the partition

    leaky = AtomicAction("leaky", frozenset(["tb"]), "value", safe, step, "id",
                         Read(tb.SNT))

    def sample(rng):
        w = tb.sample_state(rng)
        w = SubjState(
            w.self_.set(pv.LB, Heap()),
            w.joint.set(pv.LB, Heap()),
            w.other.set(pv.LB, Heap()),
        )
        return leaky, w

    fam = ActionFamily("leaky", tb.concurroid(), sample)
    reports = {r.check: r for r in check_action_properties(fam, 80, random.Random(1))}
    assert not reports["erasure-determinism"].ok


def test_non_monotone_safety_is_caught():
    def safe(w):
        return pv.LB in w.self_ and len(w.self_[pv.LB]) == 0  # pinned self

    def step(w, ctx):
        return w, (), ctx

    pinned = AtomicAction("pinned", pv.HOME, "unit", safe, step, "id", Skip())

    def sample(rng):
        return pinned, pv.initial_state()

    fam = ActionFamily("pinned", pv.concurroid(), sample)
    reports = {r.check: r for r in check_action_properties(fam, 120, random.Random(2))}
    assert not reports["safety-monotonicity"].ok


def test_skip_derived_action_returns_unit_unchanged():
    def step(w, ctx):
        return w, (), ctx

    idle = AtomicAction("idle", pv.HOME, "unit", lambda w: True, step, "id", Skip())
    w = pv.initial_state(Heap({Loc(2): 1}))
    w2, res, _ = run_atomic(idle, w, StepCtx(3))
    assert w2 == w and res == ()


def test_try_pop_cas_failure_leaves_the_state_alone():
    w = tb.initial_state(("a",))
    stale = Loc(980)
    w2, ok, _ = run_atomic(tb.try_pop(stale, Loc(0)), w, StepCtx(1))
    assert ok is False and w2 == w


def test_private_read_after_write():
    w = pv.initial_state(Heap({Loc(5): 0}))
    w1, _, _ = run_atomic(pv.write(Loc(5), 42), w, StepCtx(6))
    w2, got, _ = run_atomic(pv.read(Loc(5)), w1, StepCtx(6))
    assert got == 42 and w2 == w1
