"""Atomic actions: auxiliary-state-aware steps and their heap erasures.

An atomic action packages a safety predicate, a deterministic step
function over subjective states, the name of the transition it refines,
and the primitive heap operation it erases to.  The scheduler treats
one action as one indivisible step; the checks in
``check_action_properties`` are the executable form of the metatheory
obligations an action must satisfy (safety monotonicity, framing,
erasure determinism, totality, ...).

Primitive atomics are the machine-level vocabulary: ``Read``, ``Write``,
``Skip``, and the read-modify-write family (of which compare-and-swap
is the familiar instance).  ``Alloc``/``Dealloc`` extend the set with
the allocator's two operations, which the structured model funnels
through the private-heap acquire/release transitions.

A note on CAS: the usual presentation writes the failure branch as
re-writing the expected value, which is observationally wrong for a
cell holding something else.  ``cas`` here implements standard
semantics: on failure the cell is left untouched.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .concurroid import CheckReport, Concurroid, step_in_transition
from .fmap import FrozenMap
from .pcm import UNDEF, Hist, Loc, map_pointwise_join
from .state import (
    StateError,
    SubjState,
    flatten,
    realign_acquire,
    realign_release,
    validate,
)


class ActionSafetyError(RuntimeError):
    """An action was invoked on a state outside its safety predicate."""


# ---------------------------------------------------------------------------
# Primitive atomics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Read:
    loc: Loc


@dataclass(frozen=True)
class Write:
    loc: Loc
    val: Any


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Rmw:
    """Atomically replace the cell value by ``f(v)`` and return ``g(v)``."""

    loc: Loc
    f: Callable[[Any], Any]
    g: Callable[[Any], Any]


@dataclass(frozen=True)
class Alloc:
    pass


@dataclass(frozen=True)
class Dealloc:
    loc: Loc


Primitive = Any


def cas(loc: Loc, expected, desired) -> Rmw:
    """Compare-and-swap: write ``desired`` iff the cell holds ``expected``.

    Returns whether the swap happened; a failing CAS leaves the cell
    unchanged.
    """
    return Rmw(
        loc,
        lambda v, e=expected, d=desired: d if v == e else v,
        lambda v, e=expected: v == e,
    )


def exec_primitive(prim: Primitive, heap: dict, next_loc: int) -> tuple[Any, int]:
    """Run a primitive on a mutable concrete heap; returns (result, next_loc)."""
    if isinstance(prim, Read):
        return heap[prim.loc], next_loc
    if isinstance(prim, Write):
        heap[prim.loc] = prim.val
        return (), next_loc
    if isinstance(prim, Skip):
        return (), next_loc
    if isinstance(prim, Rmw):
        v = heap[prim.loc]
        heap[prim.loc] = prim.f(v)
        return prim.g(v), next_loc
    if isinstance(prim, Alloc):
        loc = Loc(next_loc)
        heap[loc] = UNDEF
        return loc, next_loc + 1
    if isinstance(prim, Dealloc):
        del heap[prim.loc]
        return (), next_loc
    raise TypeError(f"not a primitive atomic: {prim!r}")


# ---------------------------------------------------------------------------
# Atomic actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepCtx:
    """Per-run execution context threaded through steps (location allocator)."""

    next_loc: int


@dataclass(eq=False)
class AtomicAction:
    name: str
    home: frozenset  # labels the action may touch
    result_kind: str  # unit | bool | value | value-pair | opt-value
    safe: Callable[[SubjState], bool]
    step: Callable[[SubjState, StepCtx], tuple[SubjState, Any, StepCtx]]
    claimed: str  # transition this action refines
    primitive: Primitive

    def __repr__(self):
        return f"<action {self.name}>"


def erase(a: AtomicAction) -> Primitive:
    """The primitive atomic whose heap behavior the action refines."""
    return a.primitive


def run_atomic(a: AtomicAction, w: SubjState, ctx: StepCtx):
    """Step the action, faulting when invoked outside its safety predicate."""
    if not a.safe(w):
        raise ActionSafetyError(f"{a.name} unsafe in state {w.render()}")
    return a.step(w, ctx)


def step_matches_claim(conc: Concurroid, a: AtomicAction, w, w2) -> Optional[str]:
    """Check (w, w2) against the claimed transition (or identity).

    Returns ``None`` on success, else a message.  Identity steps are
    always admitted: a failing CAS refines the id transition.
    """
    if w == w2:
        return None
    t = conc.find(a.claimed)
    if t is None:
        return f"{a.name}: claimed transition {a.claimed!r} not in {conc.name}"
    if not step_in_transition(t, w, w2):
        return f"{a.name}: step not a member of transition {a.claimed!r}"
    return None


# ---------------------------------------------------------------------------
# Property checks (one report per property, sampled)
# ---------------------------------------------------------------------------

@dataclass
class ActionFamily:
    """A shipped action together with samplers for the property checks.

    ``sample`` draws (action-instance, safe-state) pairs; ``sample_unsafe``
    draws states outside the safety predicate when the action has a
    nontrivial one.
    """

    name: str
    conc: Concurroid
    sample: Callable[[random.Random], tuple[AtomicAction, SubjState]]
    sample_unsafe: Optional[Callable[[random.Random], tuple[AtomicAction, SubjState]]] = None
    frame_filter: Optional[Callable[[FrozenMap], bool]] = None


def _ctx_for(w: SubjState) -> StepCtx:
    f = flatten(w)
    top = max((loc.n for loc in f.keys()), default=0)
    return StepCtx(next_loc=top + 1)


def _aux_variants(w: SubjState) -> list[SubjState]:
    """States with the same flattening but a different self/other partition."""
    out = []
    for lbl in w.self_:
        sv = w.self_[lbl]
        if isinstance(sv, Hist) and len(sv.entries) > 0:
            t = max(sv.stamps())
            entry = sv.entries[t]
            moved = Hist(sv.kind, sv.entries.remove(t))
            ov = w.other[lbl]
            grown = Hist(ov.kind, ov.entries.set(t, entry))
            out.append(
                SubjState(w.self_.set(lbl, moved), w.joint, w.other.set(lbl, grown))
            )
    return out


def check_action_properties(
    fam: ActionFamily, n: int, rng: random.Random
) -> list[CheckReport]:
    """Run the seven obligations for one shipped action family."""
    conc = fam.conc
    coher = CheckReport("coherence", fam.name)
    mono = CheckReport("safety-monotonicity", fam.name)
    stepsafe = CheckReport("step-safety", fam.name)
    internal = CheckReport("internal-stepping", fam.name)
    framing = CheckReport("framing", fam.name)
    erasure = CheckReport("erasure-determinism", fam.name)
    totality = CheckReport("totality", fam.name)

    for _ in range(n):
        a, w = fam.sample(rng)
        ctx = _ctx_for(w)

        # Coherence: safe states are coherent states.
        coher.samples += 1
        if a.safe(w) and not (validate(w) and conc.coherent(w)):
            coher.add(f"{a.name}: safe but incoherent: {w.render()}")

        # Totality: safe states always step, producing a sane result.
        totality.samples += 1
        try:
            w2, res, _ = run_atomic(a, w, ctx)
        except ActionSafetyError:
            totality.add(f"{a.name}: refused a safe state")
            continue
        except Exception as exc:  # noqa: BLE001 - report, do not crash the check
            totality.add(f"{a.name}: crashed on safe state: {exc!r}")
            continue

        # Internal stepping: the step pair refines the claimed transition.
        internal.samples += 1
        msg = step_matches_claim(conc, a, w, w2)
        if msg is not None:
            internal.add(msg)

        # Guarantee is covered by transition membership; validity is not.
        if not validate(w2):
            internal.add(f"{a.name}: post-state invalid")

        # Safety monotonicity and framing, against a sampled frame.
        f = conc.sample_frame(rng)
        if fam.frame_filter is not None and not fam.frame_filter(f):
            f = None
        if f is not None:
            try:
                small = realign_release(w, f)
                large = realign_acquire(w, f)
            except StateError:
                small = large = None
            if small is not None and a.safe(small):
                mono.samples += 1
                if not a.safe(large):
                    mono.add(f"{a.name}: shrank under self-enlargement by {f!r}")
                else:
                    framing.samples += 1
                    ws, rs, _ = run_atomic(a, small, _ctx_for(small))
                    wl, rl, _ = run_atomic(a, large, _ctx_for(large))
                    expected_self = map_pointwise_join(f, ws.self_)
                    if (
                        rs != rl
                        or expected_self is None
                        or wl.self_ != expected_self
                        or wl.joint != ws.joint
                        or wl.other != w.other
                    ):
                        framing.add(
                            f"{a.name}: framed step disagrees under {f!r}"
                        )

        # Erasure determinism: the concrete behavior ignores the erased
        # auxiliary fields and partition.
        erasure.samples += 1
        f0 = flatten(w)
        heap = dict(f0)
        prim_res, _ = exec_primitive(a.primitive, heap, ctx.next_loc)
        if dict(flatten(w2)) != heap or prim_res != res:
            erasure.add(f"{a.name}: step disagrees with primitive erasure")
        for wv in _aux_variants(w):
            if flatten(wv) != f0:
                continue
            if a.safe(wv):
                wv2, resv, _ = run_atomic(a, wv, ctx)
                if resv != res or flatten(wv2) != flatten(w2):
                    erasure.add(f"{a.name}: result depends on erased partition")

    # Step safety: unsafe states must refuse to step.
    if fam.sample_unsafe is not None:
        for _ in range(min(n, 50)):
            a, w = fam.sample_unsafe(rng)
            stepsafe.samples += 1
            try:
                run_atomic(a, w, _ctx_for(w))
                stepsafe.add(f"{a.name}: stepped an unsafe state")
            except ActionSafetyError:
                pass
    else:
        stepsafe.vacuous = n

    return [coher, mono, stepsafe, internal, framing, erasure, totality]
