"""Private heaps: per-thread exclusively owned memory.

The self and other components each hold a heap, the joint part is
empty.  Reads and writes require ownership of the location (touching an
environment-owned cell is the runtime analogue of a memory-safety
fault).  Allocation and deallocation go through the structure's
acquire/release transitions, which is also the channel other structures
use to exchange heap ownership with a thread.
"""

from __future__ import annotations

import random

from ..actions import (
    ActionFamily,
    Alloc,
    AtomicAction,
    Dealloc,
    Read,
    StepCtx,
    Write,
)
from ..concurroid import Concurroid, Transition, identity_transition
from ..fmap import FrozenMap
from ..pcm import EMPTY_HEAP, UNDEF, Heap, Loc
from ..state import SubjState, validate

LB = "pv"
HOME = frozenset([LB])


def coherent(w: SubjState) -> bool:
    if set(w.labels()) != {LB} or not validate(w):
        return False
    return (
        isinstance(w.self_[LB], Heap)
        and isinstance(w.other[LB], Heap)
        and w.joint[LB] == EMPTY_HEAP
    )


def _write_member(w: SubjState, w2: SubjState) -> bool:
    if w.other != w2.other or w.joint != w2.joint:
        return False
    hs, hs2 = w.self_[LB], w2.self_[LB]
    return isinstance(hs2, Heap) and hs.keys() == hs2.keys()


def _acquire_member(w, w2, h: Heap) -> bool:
    if w.other != w2.other or w.joint != w2.joint or not h:
        return False
    grown = w.self_[LB].merge_disjoint(h)
    return grown is not None and w2.self_[LB] == Heap(grown)


def _release_member(w, w2, h: Heap) -> bool:
    return _acquire_member(w2, w, h)


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------

def _safe_home(w: SubjState) -> bool:
    return LB in w.self_ and coherent(w.restrict(HOME))


def _owns(w: SubjState, loc: Loc) -> bool:
    return loc in w.self_[LB]


def alloc() -> AtomicAction:
    def step(w, ctx: StepCtx):
        loc = Loc(ctx.next_loc)
        hs = Heap(w.self_[LB].set(loc, UNDEF))
        return (
            SubjState(w.self_.set(LB, hs), w.joint, w.other),
            loc,
            StepCtx(ctx.next_loc + 1),
        )

    return AtomicAction("alloc", HOME, "value", _safe_home, step, "pv.acquire", Alloc())


def write(loc: Loc, v) -> AtomicAction:
    def step(w, ctx):
        hs = Heap(w.self_[LB].set(loc, v))
        return SubjState(w.self_.set(LB, hs), w.joint, w.other), (), ctx

    return AtomicAction(
        f"write({loc!r})",
        HOME,
        "unit",
        lambda w: _safe_home(w) and _owns(w, loc),
        step,
        "pv.write",
        Write(loc, v),
    )


def read(loc: Loc) -> AtomicAction:
    def step(w, ctx):
        return w, w.self_[LB][loc], ctx

    return AtomicAction(
        f"read({loc!r})",
        HOME,
        "value",
        lambda w: _safe_home(w) and _owns(w, loc),
        step,
        "id",
        Read(loc),
    )


def dealloc(loc: Loc) -> AtomicAction:
    def step(w, ctx):
        hs = Heap(w.self_[LB].remove(loc))
        return SubjState(w.self_.set(LB, hs), w.joint, w.other), (), ctx

    return AtomicAction(
        f"dealloc({loc!r})",
        HOME,
        "unit",
        lambda w: _safe_home(w) and _owns(w, loc),
        step,
        "pv.release",
        Dealloc(loc),
    )


# ---------------------------------------------------------------------------
# Construction and sampling
# ---------------------------------------------------------------------------

def initial_state(self_heap: Heap = EMPTY_HEAP, other_heap: Heap = EMPTY_HEAP) -> SubjState:
    return SubjState(
        FrozenMap({LB: self_heap}),
        FrozenMap({LB: EMPTY_HEAP}),
        FrozenMap({LB: other_heap}),
    )


def sample_state(rng: random.Random) -> SubjState:
    locs = rng.sample(range(1, 12), rng.randint(0, 5))
    k = rng.randint(0, len(locs))
    hs = Heap({Loc(l): rng.randint(0, 9) for l in locs[:k]})
    ho = Heap({Loc(l): rng.randint(0, 9) for l in locs[k:]})
    return initial_state(hs, ho)


def sample_frame(rng: random.Random) -> FrozenMap:
    if rng.random() < 0.4:
        return FrozenMap({LB: EMPTY_HEAP})
    cells = {Loc(900 + i): rng.randint(0, 9) for i in rng.sample(range(8), rng.randint(1, 2))}
    return FrozenMap({LB: Heap(cells)})


def _fresh_heap(rng, w) -> Heap:
    used = {loc.n for loc in w.self_[LB]} | {loc.n for loc in w.other[LB]}
    loc = next(n for n in range(200, 400) if n not in used)
    return Heap({Loc(loc): rng.randint(0, 9)})


def concurroid() -> Concurroid:
    def write_sampler(rng):
        w = sample_state(rng)
        hs = w.self_[LB]
        if not hs:
            return None
        loc = rng.choice(sorted(hs.keys()))
        w2, _, _ = write(loc, rng.randint(10, 19)).step(w, StepCtx(0))
        return (w, w2)

    def acq_sampler(rng):
        w = sample_state(rng)
        h = _fresh_heap(rng, w)
        w2 = SubjState(
            w.self_.set(LB, Heap(w.self_[LB].merge_disjoint(h))), w.joint, w.other
        )
        return (w, w2, h)

    def rel_sampler(rng):
        w, w2, h = acq_sampler(rng)
        return (w2, w, h)

    wr = Transition("pv.write", "internal", _write_member, write_sampler)
    acq = Transition("pv.acquire", "acquire", _acquire_member, acq_sampler)
    rel = Transition("pv.release", "release", _release_member, rel_sampler)
    return Concurroid(
        name="private-heaps",
        labels=HOME,
        coherent=coherent,
        internals={"id": identity_transition(sample_state), "pv.write": wr},
        externals=[(acq, rel)],
        sample_state=sample_state,
        sample_frame=sample_frame,
    )


def action_families() -> list[ActionFamily]:
    conc = concurroid()

    def sample_alloc(rng):
        return alloc(), sample_state(rng)

    def with_owned(mk):
        def sampler(rng):
            while True:
                w = sample_state(rng)
                if w.self_[LB]:
                    loc = rng.choice(sorted(w.self_[LB].keys()))
                    return mk(rng, loc), w

        return sampler

    def with_foreign(mk):
        """Target a location owned by the environment: a fault."""

        def sampler(rng):
            while True:
                w = sample_state(rng)
                if w.other[LB]:
                    loc = rng.choice(sorted(w.other[LB].keys()))
                    return mk(rng, loc), w

        return sampler

    mk_write = lambda rng, loc: write(loc, rng.randint(20, 29))  # noqa: E731
    mk_read = lambda rng, loc: read(loc)  # noqa: E731
    mk_dealloc = lambda rng, loc: dealloc(loc)  # noqa: E731
    return [
        ActionFamily("alloc", conc, sample_alloc),
        ActionFamily("pv.write", conc, with_owned(mk_write), with_foreign(mk_write)),
        ActionFamily("pv.read", conc, with_owned(mk_read), with_foreign(mk_read)),
        ActionFamily("pv.dealloc", conc, with_owned(mk_dealloc), with_foreign(mk_dealloc)),
    ]
