"""The flat combiner: lock-based helping through a publication array.

Threads publish requests in a shared array; whoever wins the lock (the
combiner) services every published request against the protected
resource, writes results back, and releases the lock.  Each slot ``i``
has a shadow auxiliary cell holding the contribution produced on thread
``i``'s behalf; collecting a result flushes that cell into the
collector's own contribution.  Helping is thus ownership transfer of
auxiliary state, routed through the array.

Client functions are registered with three pieces: a private-heap
program computing the result, the auxiliary delta the run induces given
the cumulative contribution, and a validity predicate tying argument,
result, cumulative value, and delta together.  The shipped instance
protects a sequential stack and registers push and pop, with history
deltas mirroring the lock-free stack's.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from ..actions import ActionFamily, AtomicAction, Read, Rmw, Write, cas
from ..concurroid import Concurroid, Transition, identity_transition
from ..fmap import FrozenMap
from ..history import fresh, is_complete, is_continuous, is_stacklike, last_stamp, lookup_end
from ..pcm import (
    EMPTY_IDSET,
    INIT,
    NONE,
    NOT_OWN,
    NULL,
    OWN,
    Req,
    Resp,
    SOME,
    STACK,
    Heap,
    Hist,
    IdSet,
    Loc,
    Triple,
    is_unit,
    join,
    unit_like,
)
from ..program import ActN, IfN, InjectN, LoopN, Ret, RETRY, SpecedN, const, do
from ..state import SubjState, validate
from . import private_heap as pv

LB = "fc"
LK = Loc(3001)
AP_BASE = 3010
SNT = Loc(3101)
HOME = frozenset([LB])
FC_LOCK_HOME = frozenset([LB, pv.LB])


@dataclass
class FcFunc:
    """A registered helpable function."""

    name: str
    program: Callable[[str], object]  # argkey -> private-heap program node
    delta: Callable[[Hist, object], Hist]  # cumulative aux, arg -> delta
    f_spec: Callable[[object, object, Hist, Hist], bool]  # validity predicate


@dataclass
class FcShape:
    """Construction parameters: slot count, resource invariant, functions."""

    n: int
    inv: Callable[[Hist, Heap], bool]
    carve: Callable[[Heap], Optional[Heap]]
    aux_unit: Hist
    funcs: dict[str, FcFunc]

    def slot(self, i: int) -> Loc:
        return Loc(AP_BASE + i)


def parse_fc(shape: FcShape, jv) -> Optional[tuple]:
    """Split the joint value into (lock bit, slot statuses, resource heap, gp)."""
    if not (isinstance(jv, tuple) and len(jv) == 2):
        return None
    jh, gp = jv
    if not isinstance(jh, Heap) or not isinstance(gp, tuple) or len(gp) != shape.n:
        return None
    if LK not in jh or not isinstance(jh[LK], bool):
        return None
    slots = []
    for i in range(shape.n):
        cell = jh.get(shape.slot(i))
        if cell is None or not (cell is INIT or isinstance(cell, (Req, Resp))):
            return None
        slots.append(cell)
    skip = {LK} | {shape.slot(i) for i in range(shape.n)}
    hr = Heap({loc: v for loc, v in jh.items() if loc not in skip})
    return jh[LK], tuple(slots), hr, gp


def total_aux(shape: FcShape, w: SubjState) -> Optional[Hist]:
    """The cumulative contribution: every slot joined with self and other."""
    _, _, _, gp = parse_fc(shape, w.joint[LB])
    acc = w.self_[LB].aux
    for g in gp:
        acc = join(acc, g)
        if acc is None:
            return None
    return join(acc, w.other[LB].aux)


def coherent_for(shape: FcShape):
    def coherent(w: SubjState) -> bool:
        if set(w.labels()) != {LB} or not validate(w):
            return False
        s, o = w.self_[LB], w.other[LB]
        if not (isinstance(s, Triple) and isinstance(o, Triple)):
            return False
        parsed = parse_fc(shape, w.joint[LB])
        if parsed is None:
            return False
        locked, slots, hr, gp = parsed
        for i in range(shape.n):
            if not is_unit(gp[i]) and not isinstance(slots[i], Resp):
                return False
        mx = join(s.mx, o.mx)
        if mx is None:
            return False
        g_all = total_aux(shape, w)
        if g_all is None:
            return False
        if locked:
            return not hr and mx is OWN
        return mx is NOT_OWN and shape.inv(g_all, hr)

    return coherent


# ---------------------------------------------------------------------------
# Transitions
# ---------------------------------------------------------------------------

def _req_member(shape: FcShape):
    def member(w, w2) -> bool:
        if w.other != w2.other or w.self_ != w2.self_:
            return False
        p1, p2 = parse_fc(shape, w.joint[LB]), parse_fc(shape, w2.joint[LB])
        if p1 is None or p2 is None:
            return False
        lk1, slots1, hr1, gp1 = p1
        lk2, slots2, hr2, gp2 = p2
        if (lk1, hr1, gp1) != (lk2, hr2, gp2):
            return False
        diffs = [i for i in range(shape.n) if slots1[i] != slots2[i]]
        if len(diffs) != 1:
            return False
        i = diffs[0]
        return (
            i in w.self_[LB].ids.ids
            and slots1[i] is INIT
            and isinstance(slots2[i], Req)
            and slots2[i].fn in shape.funcs
        )

    return member


def _help_member(shape: FcShape):
    def member(w, w2) -> bool:
        if w.other != w2.other or w.self_ != w2.self_:
            return False
        if w.self_[LB].mx is not OWN:
            return False
        p1, p2 = parse_fc(shape, w.joint[LB]), parse_fc(shape, w2.joint[LB])
        if p1 is None or p2 is None:
            return False
        lk1, slots1, hr1, gp1 = p1
        lk2, slots2, hr2, gp2 = p2
        if lk1 is not True or lk2 is not True or hr1 != hr2:
            return False
        diffs = [i for i in range(shape.n) if slots1[i] != slots2[i] or gp1[i] != gp2[i]]
        if len(diffs) != 1:
            return False
        i = diffs[0]
        req = slots1[i]
        if not (isinstance(req, Req) and isinstance(slots2[i], Resp)):
            return False
        if not is_unit(gp1[i]):
            return False
        g_all = total_aux(shape, w)
        if g_all is None:
            return False
        fspec = shape.funcs[req.fn].f_spec
        return fspec(req.arg, slots2[i].val, g_all, gp2[i])

    return member


def _coll_member(shape: FcShape):
    def member(w, w2) -> bool:
        if w.other != w2.other:
            return False
        s1, s2 = w.self_[LB], w2.self_[LB]
        if (s1.ids, s1.mx) != (s2.ids, s2.mx):
            return False
        p1, p2 = parse_fc(shape, w.joint[LB]), parse_fc(shape, w2.joint[LB])
        if p1 is None or p2 is None:
            return False
        lk1, slots1, hr1, gp1 = p1
        lk2, slots2, hr2, gp2 = p2
        if (lk1, hr1) != (lk2, hr2):
            return False
        diffs = [i for i in range(shape.n) if slots1[i] != slots2[i] or gp1[i] != gp2[i]]
        if len(diffs) != 1:
            return False
        i = diffs[0]
        return (
            i in s1.ids.ids
            and isinstance(slots1[i], Resp)
            and slots2[i] is INIT
            and is_unit(gp2[i])
            and s2.aux == join(s1.aux, gp1[i])
        )

    return member


def _lock_member(shape: FcShape):
    def member(w, w2, h: Heap) -> bool:
        """Taking the lock releases the resource heap to the locker."""
        if w.other != w2.other:
            return False
        s1, s2 = w.self_[LB], w2.self_[LB]
        p1, p2 = parse_fc(shape, w.joint[LB]), parse_fc(shape, w2.joint[LB])
        if p1 is None or p2 is None:
            return False
        lk1, slots1, hr1, gp1 = p1
        lk2, slots2, hr2, gp2 = p2
        return (
            lk1 is False
            and lk2 is True
            and hr1 == h
            and not hr2
            and slots1 == slots2
            and gp1 == gp2
            and s1.mx is NOT_OWN
            and s2 == Triple(s1.ids, OWN, s1.aux)
        )

    return member


def _unlock_member(shape: FcShape):
    def member(w, w2, h: Heap) -> bool:
        if w.other != w2.other:
            return False
        s1, s2 = w.self_[LB], w2.self_[LB]
        p1, p2 = parse_fc(shape, w.joint[LB]), parse_fc(shape, w2.joint[LB])
        if p1 is None or p2 is None:
            return False
        lk1, slots1, hr1, gp1 = p1
        lk2, slots2, hr2, gp2 = p2
        if not (lk1 is True and lk2 is False and not hr1 and hr2 == h):
            return False
        if slots1 != slots2 or gp1 != gp2:
            return False
        if not (s1.mx is OWN and s2 == Triple(s1.ids, NOT_OWN, s1.aux)):
            return False
        g_all = total_aux(shape, w2)
        return g_all is not None and shape.inv(g_all, h)

    return member


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------

def _safe_home(shape: FcShape, w: SubjState) -> bool:
    return LB in w.self_ and coherent_for(shape)(w.restrict(HOME))


def req_help(shape: FcShape, tid: int, fname: str, arg) -> AtomicAction:
    cell = shape.slot(tid)

    def safe(w):
        if not _safe_home(shape, w) or tid not in w.self_[LB].ids.ids:
            return False
        _, slots, _, _ = parse_fc(shape, w.joint[LB])
        return slots[tid] is INIT and fname in shape.funcs

    def step(w, ctx):
        jh, gp = w.joint[LB]
        jv = (Heap(jh.set(cell, Req(fname, arg))), gp)
        return SubjState(w.self_, w.joint.set(LB, jv), w.other), (), ctx

    return AtomicAction(
        f"reqHelp({tid},{fname})", HOME, "unit", safe, step, "fc.req",
        Write(cell, Req(fname, arg)),
    )


def read_req(shape: FcShape, i: int) -> AtomicAction:
    cell = shape.slot(i)

    def step(w, ctx):
        jh, _ = w.joint[LB]
        return w, jh[cell], ctx

    return AtomicAction(
        f"readReq({i})", HOME, "value", lambda w: _safe_home(shape, w), step, "id",
        Read(cell),
    )


def fc_trylock(shape: FcShape) -> AtomicAction:
    def safe(w):
        return (
            pv.LB in w.self_
            and _safe_home(shape, w)
            and pv.coherent(w.restrict(frozenset([pv.LB])))
        )

    def step(w, ctx):
        jh, gp = w.joint[LB]
        if jh[LK]:
            return w, False, ctx
        _, _, hr, _ = parse_fc(shape, w.joint[LB])
        jh2 = Heap({loc: v for loc, v in jh.items() if loc not in hr}).set(LK, True)
        s = w.self_[LB]
        merged = w.self_[pv.LB].merge_disjoint(hr)
        return (
            SubjState(
                w.self_.set(LB, Triple(s.ids, OWN, s.aux)).set(pv.LB, Heap(merged)),
                w.joint.set(LB, (Heap(jh2), gp)),
                w.other,
            ),
            True,
            ctx,
        )

    return AtomicAction(
        "fc.tryLock", FC_LOCK_HOME, "bool", safe, step, "xchg:pv.acquire|fc.lock",
        cas(LK, False, True),
    )


def do_help(shape: FcShape, i: int, result, fname: str, arg) -> AtomicAction:
    cell = shape.slot(i)

    def safe(w):
        if not _safe_home(shape, w) or w.self_[LB].mx is not OWN:
            return False
        _, slots, _, _ = parse_fc(shape, w.joint[LB])
        if slots[i] != Req(fname, arg):
            return False
        g_all = total_aux(shape, w)
        func = shape.funcs[fname]
        return g_all is not None and func.f_spec(arg, result, g_all, func.delta(g_all, arg))

    def step(w, ctx):
        jh, gp = w.joint[LB]
        g_all = total_aux(shape, w)
        delta = shape.funcs[fname].delta(g_all, arg)
        gp2 = gp[:i] + (delta,) + gp[i + 1 :]
        jv = (Heap(jh.set(cell, Resp(result))), gp2)
        return SubjState(w.self_, w.joint.set(LB, jv), w.other), (), ctx

    return AtomicAction(
        f"doHelp({i},{fname})", HOME, "unit", safe, step, "fc.help",
        Write(cell, Resp(result)),
    )


def fc_unlock(shape: FcShape) -> AtomicAction:
    def safe(w):
        if pv.LB not in w.self_ or LB not in w.self_:
            return False
        s = w.self_[LB]
        if not (isinstance(s, Triple) and s.mx is OWN):
            return False
        jh, _ = w.joint[LB]
        if jh.get(LK) is not True:
            return False
        h = shape.carve(w.self_[pv.LB])
        if h is None:
            return False
        g_all = total_aux(shape, w)
        return g_all is not None and shape.inv(g_all, h)

    def step(w, ctx):
        jh, gp = w.joint[LB]
        h = shape.carve(w.self_[pv.LB])
        rest = Heap({loc: v for loc, v in w.self_[pv.LB].items() if loc not in h})
        jh2 = Heap(Heap(jh.set(LK, False)).merge_disjoint(h))
        s = w.self_[LB]
        return (
            SubjState(
                w.self_.set(LB, Triple(s.ids, NOT_OWN, s.aux)).set(pv.LB, rest),
                w.joint.set(LB, (jh2, gp)),
                w.other,
            ),
            (),
            ctx,
        )

    return AtomicAction(
        "fc.unlock", FC_LOCK_HOME, "unit", safe, step, "xchg:fc.unlock|pv.release",
        Write(LK, False),
    )


def try_collect(shape: FcShape, tid: int) -> AtomicAction:
    cell = shape.slot(tid)

    def safe(w):
        return _safe_home(shape, w) and tid in w.self_[LB].ids.ids

    def step(w, ctx):
        jh, gp = w.joint[LB]
        stat = jh[cell]
        if not isinstance(stat, Resp):
            return w, NONE, ctx
        s = w.self_[LB]
        s2 = Triple(s.ids, s.mx, join(s.aux, gp[tid]))
        gp2 = gp[:tid] + (unit_like(gp[tid]),) + gp[tid + 1 :]
        jv = (Heap(jh.set(cell, INIT)), gp2)
        return (
            SubjState(w.self_.set(LB, s2), w.joint.set(LB, jv), w.other),
            SOME(stat.val),
            ctx,
        )

    return AtomicAction(
        f"tryCollect({tid})", HOME, "opt-value", safe, step, "fc.coll",
        Rmw(
            cell,
            lambda v: INIT if isinstance(v, Resp) else v,
            lambda v: SOME(v.val) if isinstance(v, Resp) else NONE,
        ),
    )


# ---------------------------------------------------------------------------
# The stack instantiation
# ---------------------------------------------------------------------------

def parse_seq_stack(h: Heap) -> Optional[tuple]:
    """A garbage-free sequential stack: sentinel plus exactly its chain."""
    if SNT not in h:
        return None
    p = h[SNT]
    contents, seen = [], set()
    while p != NULL:
        if p in seen or p not in h:
            return None
        cell = h[p]
        if not (isinstance(cell, tuple) and len(cell) == 2 and isinstance(cell[1], Loc)):
            return None
        seen.add(p)
        contents.append(cell[0])
        p = cell[1]
    if set(h.keys()) != seen | {SNT}:
        return None
    return tuple(contents), seen


def seq_stack_inv(total: Hist, h: Heap) -> bool:
    parsed = parse_seq_stack(h)
    if parsed is None:
        return False
    contents, _ = parsed
    if not (is_complete(total) and is_continuous(total) and is_stacklike(total)):
        return False
    return lookup_end(total, last_stamp(total)) == contents


def seq_stack_carve(h: Heap) -> Optional[Heap]:
    if SNT not in h:
        return None
    cells = {SNT: h[SNT]}
    p = h[SNT]
    seen = set()
    while p != NULL:
        if p in seen or p not in h:
            return None
        cell = h[p]
        if not (isinstance(cell, tuple) and len(cell) == 2 and isinstance(cell[1], Loc)):
            return None
        seen.add(p)
        cells[p] = cell
        p = cell[1]
    return Heap(cells)


def _push_delta(g_all: Hist, arg) -> Hist:
    l = lookup_end(g_all, last_stamp(g_all))
    return Hist.of(STACK, {fresh(g_all): (l, (arg,) + l)})


def f_spec_push(arg, result, g_prime: Hist, delta: Hist) -> bool:
    """Validity of a helped push: unit result and the singleton push event
    stamped fresh against the cumulative history."""
    return result == () and delta == _push_delta(g_prime, arg)


def _pop_delta(g_all: Hist, arg) -> Hist:
    l = lookup_end(g_all, last_stamp(g_all))
    if not l:
        return Hist(STACK)
    return Hist.of(STACK, {fresh(g_all): (l, l[1:])})


def f_spec_pop(arg, result, g_prime: Hist, delta: Hist) -> bool:
    l = lookup_end(g_prime, last_stamp(g_prime))
    if not l:
        return result == NONE and delta == Hist(STACK)
    return result == SOME(l[0]) and delta == _pop_delta(g_prime, arg)


def _seq_push_program(argkey: str):
    inj = lambda n: InjectN(n, frozenset([pv.LB]))  # noqa: E731
    return do(
        ("_p", inj(ActN(lambda env: pv.alloc(), "alloc"))),
        ("_p1", inj(ActN(lambda env: pv.read(SNT), "readTop"))),
        (None, inj(ActN(lambda env, k=argkey: pv.write(env["_p"], (env[k], env["_p1"])), "fillNode"))),
        (None, inj(ActN(lambda env: pv.write(SNT, env["_p"]), "setTop"))),
        ret=const(()),
    )


def _seq_pop_program(argkey: str):
    inj = lambda n: InjectN(n, frozenset([pv.LB]))  # noqa: E731
    return do(
        ("_p", inj(ActN(lambda env: pv.read(SNT), "readTop"))),
        ret=IfN(
            lambda env: env["_p"] == NULL,
            const(NONE),
            do(
                ("_n", inj(ActN(lambda env: pv.read(env["_p"]), "readNode"))),
                (None, inj(ActN(lambda env: pv.write(SNT, env["_n"][1]), "setTop"))),
                (None, inj(ActN(lambda env: pv.dealloc(env["_p"]), "freeNode"))),
                ret=Ret(lambda env: SOME(env["_n"][0])),
            ),
        ),
    )


def stack_shape(n: int) -> FcShape:
    return FcShape(
        n=n,
        inv=seq_stack_inv,
        carve=seq_stack_carve,
        aux_unit=Hist(STACK),
        funcs={
            "push": FcFunc("push", _seq_push_program, _push_delta, f_spec_push),
            "pop": FcFunc("pop", _seq_pop_program, _pop_delta, f_spec_pop),
        },
    )


# ---------------------------------------------------------------------------
# Construction, concurroid, procedures
# ---------------------------------------------------------------------------

def initial_state(shape: FcShape, contents: tuple = ()) -> SubjState:
    """Fresh structure: lock free, all slots Init, resource stack holding
    ``contents``; the installer owns all slot ids and the init event."""
    cells = {LK: False}
    for i in range(shape.n):
        cells[shape.slot(i)] = INIT
    locs = [Loc(3102 + i) for i in range(len(contents))]
    for i, e in enumerate(contents):
        cells[locs[i]] = (e, locs[i + 1] if i + 1 < len(locs) else NULL)
    cells[SNT] = locs[0] if contents else NULL
    gp = tuple(shape.aux_unit for _ in range(shape.n))
    init_hist = Hist.of(STACK, {0: (contents, contents)})
    return SubjState(
        FrozenMap({LB: Triple(IdSet.of(*range(shape.n)), NOT_OWN, init_hist)}),
        FrozenMap({LB: (Heap(cells), gp)}),
        FrozenMap({LB: Triple(EMPTY_IDSET, NOT_OWN, Hist(STACK))}),
    )


_ELEMS = "uvwxyz"


def sample_state(shape: FcShape, rng: random.Random) -> SubjState:
    """Random admissible state: evolve a stack history, scatter its events
    over the slot cells and the two contributions, pick slot statuses."""
    contents: tuple = ()
    entries = {0: ((), ())}
    for t in range(1, rng.randint(1, 6)):
        if contents and rng.random() < 0.4:
            entries[t] = (contents, contents[1:])
            contents = contents[1:]
        else:
            e = rng.choice(_ELEMS)
            entries[t] = (contents, (e,) + contents)
            contents = (e,) + contents
    stamps = [t for t in entries if t > 0]
    rng.shuffle(stamps)
    slots, gp = [], []
    for i in range(shape.n):
        r = rng.random()
        if r < 0.4:
            slots.append(INIT)
            gp.append(shape.aux_unit)
        elif r < 0.7:
            slots.append(Req("push", rng.choice(_ELEMS)))
            gp.append(shape.aux_unit)
        else:
            slots.append(Resp(()))
            if stamps and rng.random() < 0.8:
                t = stamps.pop()
                gp.append(Hist.of(STACK, {t: entries[t]}))
            else:
                gp.append(shape.aux_unit)
    taken = {s for g in gp for s in g.stamps()}
    remaining = [t for t in entries if t not in taken]
    mine = {t: entries[t] for t in remaining if rng.random() < 0.5}
    rest = {t: entries[t] for t in remaining if t not in mine}
    ids = set(range(shape.n)) | set(rng.sample(range(shape.n, shape.n + 3), rng.randint(0, 2)))
    mine_ids = frozenset(i for i in ids if rng.random() < 0.6)
    locked = rng.random() < 0.35
    cells = {LK: locked}
    for i in range(shape.n):
        cells[shape.slot(i)] = slots[i]
    if not locked:
        locs = [Loc(3102 + i) for i in range(len(contents))]
        for i, e in enumerate(contents):
            cells[locs[i]] = (e, locs[i + 1] if i + 1 < len(locs) else NULL)
        cells[SNT] = locs[0] if contents else NULL
        mx_s = NOT_OWN
        mx_o = NOT_OWN
    else:
        own_self = rng.random() < 0.6
        mx_s = OWN if own_self else NOT_OWN
        mx_o = NOT_OWN if own_self else OWN
    return SubjState(
        FrozenMap({LB: Triple(IdSet(mine_ids), mx_s, Hist.of(STACK, mine))}),
        FrozenMap({LB: (Heap(cells), tuple(gp))}),
        FrozenMap({LB: Triple(IdSet(ids - mine_ids), mx_o, Hist.of(STACK, rest))}),
    )


def sample_frame(shape: FcShape, rng: random.Random) -> FrozenMap:
    unit = Triple(EMPTY_IDSET, NOT_OWN, Hist(STACK))
    if rng.random() < 0.5:
        return FrozenMap({LB: unit})
    return FrozenMap(
        {LB: Triple(IdSet.of(rng.randint(20, 24)), NOT_OWN, Hist(STACK))}
    )


def concurroid(shape: FcShape) -> Concurroid:
    def state_sampler(rng):
        return sample_state(shape, rng)

    def req_sampler(rng):
        for _ in range(64):
            w = sample_state(shape, rng)
            _, slots, _, _ = parse_fc(shape, w.joint[LB])
            open_slots = [
                i for i in range(shape.n)
                if slots[i] is INIT and i in w.self_[LB].ids.ids
            ]
            if open_slots:
                i = rng.choice(open_slots)
                a = req_help(shape, i, "push", rng.choice(_ELEMS))
                w2, _, _ = a.step(w, None)
                return (w, w2)
        return None

    def coll_sampler(rng):
        for _ in range(64):
            w = sample_state(shape, rng)
            _, slots, _, _ = parse_fc(shape, w.joint[LB])
            ready = [
                i for i in range(shape.n)
                if isinstance(slots[i], Resp) and i in w.self_[LB].ids.ids
            ]
            if ready:
                i = rng.choice(ready)
                w2, _, _ = try_collect(shape, i).step(w, None)
                return (w, w2)
        return None

    def help_sampler(rng):
        for _ in range(128):
            w = sample_state(shape, rng)
            locked, slots, _, _ = parse_fc(shape, w.joint[LB])
            if not locked or w.self_[LB].mx is not OWN:
                continue
            reqs = [i for i in range(shape.n) if isinstance(slots[i], Req)]
            if not reqs:
                continue
            i = rng.choice(reqs)
            g_all = total_aux(shape, w)
            if g_all is None:
                continue
            a = do_help(shape, i, (), slots[i].fn, slots[i].arg)
            if not a.safe(w):
                continue
            w2, _, _ = a.step(w, None)
            return (w, w2)
        return None

    def lock_sampler(rng):
        for _ in range(64):
            w = sample_state(shape, rng)
            locked, _, hr, gp = parse_fc(shape, w.joint[LB])
            if locked or w.self_[LB].mx is not NOT_OWN:
                continue
            jh, _ = w.joint[LB]
            jh2 = Heap({loc: v for loc, v in jh.items() if loc not in hr}).set(LK, True)
            s = w.self_[LB]
            w2 = SubjState(
                w.self_.set(LB, Triple(s.ids, OWN, s.aux)),
                w.joint.set(LB, (Heap(jh2), gp)),
                w.other,
            )
            return (w, w2, hr)
        return None

    def unlock_sampler(rng):
        drawn = lock_sampler(rng)
        if drawn is None:
            return None
        w, w2, h = drawn
        return (w2, w, h)

    req_t = Transition("fc.req", "internal", _req_member(shape), req_sampler)
    help_t = Transition("fc.help", "internal", _help_member(shape), help_sampler)
    coll_t = Transition("fc.coll", "internal", _coll_member(shape), coll_sampler)
    alpha = Transition("fc.unlock", "acquire", _unlock_member(shape), unlock_sampler)
    rho = Transition("fc.lock", "release", _lock_member(shape), lock_sampler)
    return Concurroid(
        name="flat-combiner",
        labels=HOME,
        coherent=coherent_for(shape),
        internals={
            "id": identity_transition(state_sampler),
            "fc.req": req_t,
            "fc.help": help_t,
            "fc.coll": coll_t,
        },
        externals=[(alpha, rho)],
        sample_state=state_sampler,
        sample_frame=lambda rng: sample_frame(shape, rng),
    )


def _inj_fc(node) -> InjectN:
    return InjectN(node, HOME)


def flat_combine_program(shape: FcShape, tid: int, fname: str, arg, spec=None):
    """flatCombine(f, x) for a fixed thread id: publish, loop trying to
    combine, collect the result."""

    collect = do(
        ("rc", _inj_fc(ActN(lambda env: try_collect(shape, tid), "tryCollect"))),
        ret=IfN(
            lambda env: env["rc"] != NONE,
            Ret(lambda env: env["rc"][1]),
            RETRY,
        ),
    )

    combine = do((None, ActN(lambda env: fc_unlock(shape), "unlock")), ret=collect)
    for i in reversed(range(shape.n)):
        slot_var = f"req{i}"
        arg_var = f"arg{i}"
        res_var = f"res{i}"

        def mk_dispatch(i=i, slot_var=slot_var, arg_var=arg_var, res_var=res_var, rest=combine):
            node = rest
            for fn_name, func in sorted(shape.funcs.items(), reverse=True):
                node = IfN(
                    lambda env, fn=fn_name, sv=slot_var: isinstance(env[sv], Req)
                    and env[sv].fn == fn,
                    do(
                        (arg_var, Ret(lambda env, sv=slot_var: env[sv].arg)),
                        (res_var, func.program(arg_var)),
                        (None, _inj_fc(ActN(
                            lambda env, i=i, fn=fn_name, av=arg_var, rv=res_var:
                            do_help(shape, i, env[rv], fn, env[av]),
                            f"doHelp({i})",
                        ))),
                        ret=rest,
                    ),
                    node,
                )
            return do((slot_var, _inj_fc(ActN(lambda env, i=i: read_req(shape, i), f"readReq({i})"))), ret=node)

        combine = mk_dispatch()

    body = do(
        ("locked", ActN(lambda env: fc_trylock(shape), "tryLock")),
        ret=IfN(lambda env: env["locked"], combine, collect),
    )
    prog = do(
        (None, _inj_fc(ActN(lambda env: req_help(shape, tid, fname, arg), "reqHelp"))),
        ret=LoopN(body),
    )
    return SpecedN(spec, prog) if spec is not None else prog


def action_families(shape: Optional[FcShape] = None) -> list[ActionFamily]:
    from ..concurroid import entangle

    shape = shape or stack_shape(3)
    conc = concurroid(shape)
    ent = entangle(pv.concurroid(), conc)

    def entangled(rng, want_locked=None, want_req=False):
        for _ in range(256):
            w = sample_state(shape, rng)
            locked, slots, _, _ = parse_fc(shape, w.joint[LB])
            if want_locked is not None and locked != want_locked:
                continue
            if want_locked and w.self_[LB].mx is not OWN:
                continue
            if want_req and not any(isinstance(s, Req) for s in slots):
                continue
            hp = pv.sample_state(rng)
            hs = hp.self_[pv.LB]
            if locked and w.self_[LB].mx is OWN:
                g_all = total_aux(shape, w)
                l = lookup_end(g_all, last_stamp(g_all))
                locs = [Loc(3102 + i) for i in range(len(l))]
                cells = dict(hs)
                for i, e in enumerate(l):
                    cells[locs[i]] = (e, locs[i + 1] if i + 1 < len(locs) else NULL)
                cells[SNT] = locs[0] if l else NULL
                hs = Heap(cells)
            return SubjState(
                w.self_.set(pv.LB, hs),
                w.joint.set(pv.LB, Heap()),
                w.other.set(pv.LB, hp.other[pv.LB]),
            )
        return None

    def sample_req(rng):
        while True:
            w = sample_state(shape, rng)
            _, slots, _, _ = parse_fc(shape, w.joint[LB])
            open_slots = [
                i for i in range(shape.n)
                if slots[i] is INIT and i in w.self_[LB].ids.ids
            ]
            if open_slots:
                i = rng.choice(open_slots)
                return req_help(shape, i, "push", rng.choice(_ELEMS)), w

    def bad_req(rng):
        while True:
            w = sample_state(shape, rng)
            _, slots, _, _ = parse_fc(shape, w.joint[LB])
            busy = [i for i in range(shape.n) if slots[i] is not INIT]
            if busy:
                return req_help(shape, rng.choice(busy), "push", "u"), w

    def sample_read_req(rng):
        return read_req(shape, rng.randrange(shape.n)), sample_state(shape, rng)

    def sample_trylock(rng):
        w = entangled(rng, want_locked=False)
        return fc_trylock(shape), w

    def sample_do_help(rng):
        while True:
            w = sample_state(shape, rng)
            locked, slots, _, _ = parse_fc(shape, w.joint[LB])
            if not locked or w.self_[LB].mx is not OWN:
                continue
            reqs = [i for i in range(shape.n) if isinstance(slots[i], Req)]
            if not reqs:
                continue
            i = rng.choice(reqs)
            g_all = total_aux(shape, w)
            l = lookup_end(g_all, last_stamp(g_all))
            res = () if slots[i].fn == "push" else (SOME(l[0]) if l else NONE)
            a = do_help(shape, i, res, slots[i].fn, slots[i].arg)
            if a.safe(w):
                return a, w

    def bad_do_help(rng):
        while True:
            w = sample_state(shape, rng)
            locked, slots, _, _ = parse_fc(shape, w.joint[LB])
            if w.self_[LB].mx is OWN:
                continue
            reqs = [i for i in range(shape.n) if isinstance(slots[i], Req)]
            if reqs:
                i = rng.choice(reqs)
                return do_help(shape, i, (), slots[i].fn, slots[i].arg), w

    def sample_unlock(rng):
        while True:
            w = entangled(rng, want_locked=True)
            if w is not None:
                a = fc_unlock(shape)
                if a.safe(w):
                    return a, w

    def bad_unlock(rng):
        while True:
            w = entangled(rng, want_locked=False)
            if w is not None:
                return fc_unlock(shape), w

    def sample_collect(rng):
        while True:
            w = sample_state(shape, rng)
            ids = w.self_[LB].ids.ids
            mine = [i for i in range(shape.n) if i in ids]
            if mine:
                return try_collect(shape, rng.choice(mine)), w

    def fc_unit_frames(f):
        part = f.get(LB)
        return part is None or (is_unit(part.aux) if isinstance(part, Triple) else False) or part == Triple(EMPTY_IDSET, NOT_OWN, Hist(STACK))

    return [
        ActionFamily("fc.reqHelp", conc, sample_req, bad_req),
        ActionFamily("fc.readReq", conc, sample_read_req),
        ActionFamily("fc.tryLock", ent, sample_trylock),
        ActionFamily("fc.doHelp", conc, sample_do_help, bad_do_help),
        ActionFamily("fc.unlock", ent, sample_unlock, bad_unlock),
        ActionFamily("fc.tryCollect", conc, sample_collect),
    ]
