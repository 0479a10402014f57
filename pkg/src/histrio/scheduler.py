"""The interleaving explorer.

Machine configurations are immutable and hashable: a tree of threads
(leaves carry a program node, an environment, a continuation stack, and
the thread's self map), the shared joint map, the environment-owned
root map, and the installed concurroid.  Administrative reductions
(sequencing, conditionals, forks, joins, spec capture, hiding) are
performed eagerly and deterministically; the only branching points are
atomic actions, so interleaving counts are exact.

Exhaustive mode runs a depth-first search over configurations, merging
on (configuration, steps-used) so converging interleavings share their
subtrees while path counts stay exact.  Random mode draws one schedule
from a seeded generator.  Every step checks post-state coherence,
claimed-transition membership, the guarantee (the stepping thread never
touches its environment's state), injection scoping, and monotone
growth of history-valued self components; method specs are evaluated at
their return points.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .actions import ActionSafetyError, AtomicAction, StepCtx, run_atomic, step_matches_claim
from .concurroid import Concurroid
from .fmap import EMPTY_MAP, FrozenMap
from .pcm import Heap, Hist, Triple, map_pointwise_join, pcm_order, render, unit_like
from .program import (
    ActN,
    HideN,
    IfN,
    LoopN,
    LOOP_RETRY,
    Node,
    ParN,
    Ret,
    Seq,
    SpecedN,
    InjectN,
)
from .state import (
    StateError,
    SubjState,
    flatten,
    subjective_join,
    subjective_split,
    validate,
)


class SchedulerError(RuntimeError):
    """A structural scenario bug (bad split directive, hide misuse...)."""


# ---------------------------------------------------------------------------
# Continuation frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeqK:
    var: Optional[str]
    rest: Node
    env: FrozenMap


@dataclass(frozen=True)
class LoopK:
    loop: LoopN
    env: FrozenMap
    remaining: int


@dataclass(frozen=True)
class InjectK:
    home: frozenset


@dataclass(frozen=True)
class SpecK:
    spec: Any
    caps: Any


@dataclass(frozen=True, eq=False)
class HideK:
    phi: Any
    outer: Concurroid


RUN, DONE, STUCK = "run", "done", "stuck"


@dataclass(frozen=True)
class Leaf:
    tid: int
    node: Optional[Node]
    env: FrozenMap
    kont: tuple
    self_: FrozenMap
    status: str = RUN
    result: Any = None
    pending: Optional[tuple] = None  # ("v", value) awaiting continuation


@dataclass(frozen=True)
class ParT:
    left: Any
    right: Any
    tid: int
    env: FrozenMap
    kont: tuple


@dataclass(frozen=True, eq=False)
class Config:
    tree: Any
    joint: FrozenMap
    root_other: FrozenMap
    conc: Concurroid
    next_loc: int
    next_tid: int

    def __eq__(self, other):
        return (
            isinstance(other, Config)
            and self.conc is other.conc
            and self.next_loc == other.next_loc
            and self.next_tid == other.next_tid
            and self.tree == other.tree
            and self.joint == other.joint
            and self.root_other == other.root_other
        )

    def __hash__(self):
        return hash(
            (self.tree, self.joint, self.root_other, id(self.conc),
             self.next_loc, self.next_tid)
        )


def leaves(tree) -> list[Leaf]:
    if isinstance(tree, Leaf):
        return [tree]
    return leaves(tree.left) + leaves(tree.right)


def replace_leaf(tree, tid: int, repl):
    if isinstance(tree, Leaf):
        return repl if tree.tid == tid else tree
    left = replace_leaf(tree.left, tid, repl)
    if left is not tree.left:
        return ParT(left, tree.right, tree.tid, tree.env, tree.kont)
    right = replace_leaf(tree.right, tid, repl)
    if right is not tree.right:
        return ParT(tree.left, right, tree.tid, tree.env, tree.kont)
    return tree


def leaf_view(cfg: Config, leaf: Leaf) -> SubjState:
    other = cfg.root_other
    for l2 in leaves(cfg.tree):
        if l2.tid != leaf.tid:
            other = map_pointwise_join(l2.self_, other)
            if other is None:
                raise SchedulerError("sibling self maps do not join")
    return SubjState(leaf.self_, cfg.joint, other)


def global_total(cfg: Config) -> FrozenMap:
    total = cfg.root_other
    for l2 in leaves(cfg.tree):
        total = map_pointwise_join(l2.self_, total)
        if total is None:
            raise SchedulerError("subjective accounting broken: selves do not join")
    return total


# ---------------------------------------------------------------------------
# Hiding
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PhiSpec:
    """Abstraction predicate governing a hidden structure.

    ``erase`` maps an abstract value to the concrete heap it occupies,
    ``install`` builds the hidden labels' initial self/joint fragments
    from that heap, ``membership`` decides whether a hidden-label state
    realizes a given abstract value, and ``recover`` extracts the
    abstract value from a final hidden-label state.
    """

    name: str
    labels: frozenset
    conc: Concurroid
    g0: Any
    erase: Callable[[Any], Heap]
    install: Callable[[Any, Heap], tuple[FrozenMap, FrozenMap]]
    membership: Callable[[Any, SubjState], bool]
    recover: Callable[[SubjState], Any]
    sample_member: Optional[Callable[[random.Random], tuple[Any, SubjState]]] = None


def check_phi(phi: PhiSpec, n: int, rng: random.Random):
    """Sampled coherence, injectivity, guarantee, and precision of Phi."""
    from .concurroid import CheckReport

    rep = CheckReport("phi-properties", phi.name)
    if phi.sample_member is None:
        rep.vacuous = n
        return rep
    drawn = []
    for _ in range(n):
        g, w = phi.sample_member(rng)
        rep.samples += 1
        if not phi.membership(g, w):
            rep.add("sampled member rejected by membership")
            continue
        if not phi.conc.coherent(w):
            rep.add(f"member of Phi({render(g)}) incoherent")
        for lbl in phi.labels:
            if w.other[lbl] != unit_like(w.other[lbl]):
                rep.add("member has non-unit environment component")
        drawn.append((g, w))
    for g1, w1 in drawn[:40]:
        for g2, w2 in drawn[:40]:
            if g1 != g2 and w1 == w2:
                rep.add("injectivity: one state realizes two values")
            if g1 == g2 and flatten(w1) == flatten(w2) and w1 != w2:
                rep.add("precision: equal erasures, different states")
    return rep


# ---------------------------------------------------------------------------
# Scenarios and reports
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Scenario:
    name: str
    conc: Concurroid
    root: SubjState
    program: Node
    step_invariants: list = field(default_factory=list)
    on_join: Optional[Callable[[SubjState, SubjState, SubjState], list]] = None
    on_hide_exit: Optional[Callable[[PhiSpec, Any, SubjState], list]] = None
    final_oracle: Optional[Callable[[Config, Any], list]] = None
    meta: dict = field(default_factory=dict)


@dataclass
class Violation:
    step: int
    thread: int
    check: str
    expected: str
    actual: str
    schedule: tuple
    trace: tuple

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "thread": self.thread,
            "check": self.check,
            "expected": self.expected,
            "actual": self.actual,
            "schedule": list(self.schedule),
            "trace": [list(e) for e in self.trace],
        }


@dataclass
class Event:
    index: int
    tid: int
    action: str
    transition: str
    result: Any
    delta: str

    def as_row(self) -> tuple:
        return (self.index, self.tid, self.action, self.transition,
                render(self.result), self.delta)


@dataclass
class Trace:
    events: list
    schedule: tuple
    final: Optional[Config]
    verdict: str
    violations: list
    results: Any = None

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "schedule": list(self.schedule),
            "events": [e.as_row() for e in self.events],
            "violations": [v.as_dict() for v in self.violations],
            "result": render(self.results),
        }


@dataclass
class ExplorationReport:
    scenario: str
    complete: int = 0
    inconclusive: int = 0
    violating: int = 0
    violations: list = field(default_factory=list)
    finals: set = field(default_factory=set)
    nodes: int = 0
    edges: int = 0

    @property
    def interleavings(self) -> int:
        return self.complete

    @property
    def verdict(self) -> str:
        if self.violations:
            return "violation"
        if self.complete == 0:
            return "inconclusive"
        return "pass"

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "verdict": self.verdict,
            "interleavings": self.complete,
            "inconclusive_count": self.inconclusive,
            "violating_paths": self.violating,
            "distinct_final_states": len(self.finals),
            "violations": [v.as_dict() for v in self.violations[:20]],
            "stats": {"nodes": self.nodes, "edges": self.edges},
        }


class _Ctx:
    """Mutable exploration context: bounds, sinks, and the current path."""

    def __init__(self, scenario: Scenario, loop_bound: int, max_violations: int = 50):
        self.scenario = scenario
        self.loop_bound = loop_bound
        self.max_violations = max_violations
        self.violations: list[Violation] = []
        self.path: list[tuple] = []  # (tid, action, result)
        self.checked_finals: dict = {}

    def report(self, check: str, expected: str, actual: str, tid: int):
        if len(self.violations) >= self.max_violations:
            return
        self.violations.append(
            Violation(
                step=len(self.path),
                thread=tid,
                check=check,
                expected=expected,
                actual=actual,
                schedule=tuple(t for t, _, _ in self.path),
                trace=tuple(self.path),
            )
        )


# ---------------------------------------------------------------------------
# Normalization: administrative reductions
# ---------------------------------------------------------------------------

def _deliver(cfg: Config, leaf: Leaf, ctx: _Ctx) -> Config:
    """Pop one continuation frame for a leaf carrying a pending value."""
    value = leaf.pending[1]
    if not leaf.kont:
        done = Leaf(leaf.tid, None, leaf.env, (), leaf.self_, DONE, value, None)
        return Config(replace_leaf(cfg.tree, leaf.tid, done), cfg.joint,
                      cfg.root_other, cfg.conc, cfg.next_loc, cfg.next_tid)
    frame, rest = leaf.kont[-1], leaf.kont[:-1]
    if isinstance(frame, SeqK):
        env = frame.env.set(frame.var, value) if frame.var else frame.env
        nxt = Leaf(leaf.tid, frame.rest, env, rest, leaf.self_)
    elif isinstance(frame, LoopK):
        if value is LOOP_RETRY:
            if frame.remaining <= 0:
                return Config(
                    replace_leaf(cfg.tree, leaf.tid,
                                 Leaf(leaf.tid, None, leaf.env, leaf.kont,
                                      leaf.self_, STUCK, None, None)),
                    cfg.joint, cfg.root_other, cfg.conc, cfg.next_loc, cfg.next_tid)
            nxt = Leaf(
                leaf.tid, frame.loop.body, frame.env,
                rest + (LoopK(frame.loop, frame.env, frame.remaining - 1),),
                leaf.self_)
        else:
            nxt = Leaf(leaf.tid, None, leaf.env, rest, leaf.self_,
                       RUN, None, ("v", value))
    elif isinstance(frame, InjectK):
        nxt = Leaf(leaf.tid, None, leaf.env, rest, leaf.self_, RUN, None, ("v", value))
    elif isinstance(frame, SpecK):
        view = leaf_view(cfg, leaf)
        msg = frame.spec.post(frame.caps, view, value)
        if msg is not None:
            ctx.report(f"spec:{frame.spec.name}", frame.spec.name, msg, leaf.tid)
        nxt = Leaf(leaf.tid, None, leaf.env, rest, leaf.self_, RUN, None, ("v", value))
    elif isinstance(frame, HideK):
        return _hide_exit(cfg, leaf, frame, rest, value, ctx)
    else:
        raise SchedulerError(f"unknown frame {frame!r}")
    return Config(replace_leaf(cfg.tree, leaf.tid, nxt), cfg.joint,
                  cfg.root_other, cfg.conc, cfg.next_loc, cfg.next_tid)


def _hide_enter(cfg: Config, leaf: Leaf, node: HideN, ctx: _Ctx) -> Config:
    phi = node.phi
    if not isinstance(cfg.tree, Leaf):
        raise SchedulerError("hide requires a solo thread")
    if "pv" not in leaf.self_:
        raise SchedulerError("hide requires private heaps")
    k = phi.erase(phi.g0)
    pv_self = leaf.self_["pv"]
    for loc, v in k.items():
        if pv_self.get(loc) != v:
            raise SchedulerError(f"hide: private heap lacks {loc!r} -> {render(v)}")
    pv2 = Heap({loc: v for loc, v in pv_self.items() if loc not in k})
    self_frag, joint_frag = phi.install(phi.g0, k)
    inner = node.entangled_with(cfg.conc)
    self2 = leaf.self_.set("pv", pv2)
    other2 = cfg.root_other
    for lbl in phi.labels:
        self2 = self2.set(lbl, self_frag[lbl])
        other2 = other2.set(lbl, unit_like(self_frag[lbl]))
    joint2 = cfg.joint
    for lbl in phi.labels:
        joint2 = joint2.set(lbl, joint_frag[lbl])
    nxt = Leaf(leaf.tid, node.body, leaf.env, leaf.kont + (HideK(phi, cfg.conc),), self2)
    cfg2 = Config(nxt, joint2, other2, inner, cfg.next_loc, cfg.next_tid)
    hidden = leaf_view(cfg2, nxt).restrict(phi.labels)
    if not phi.membership(phi.g0, hidden):
        ctx.report("hide:install", f"Phi({render(phi.g0)})", hidden.render(), leaf.tid)
    return cfg2


def _hide_exit(cfg: Config, leaf: Leaf, frame: HideK, rest: tuple, value, ctx: _Ctx) -> Config:
    phi = frame.phi
    if not isinstance(cfg.tree, Leaf):
        raise SchedulerError("hide exit requires a solo thread")
    w = leaf_view(cfg, leaf)
    hidden = w.restrict(phi.labels)
    for lbl in phi.labels:
        if hidden.other[lbl] != unit_like(hidden.other[lbl]):
            ctx.report("hide:exit", "unit environment component",
                       render(hidden.other[lbl]), leaf.tid)
    g2 = phi.recover(hidden)
    if g2 is None or not phi.membership(g2, hidden):
        ctx.report("hide:exit", "a value g' with the final state in Phi(g')",
                   hidden.render(), leaf.tid)
    if ctx.scenario.on_hide_exit is not None:
        for msg in ctx.scenario.on_hide_exit(phi, g2, hidden):
            ctx.report("hide:check", phi.name, msg, leaf.tid)
    back = flatten(hidden)
    pv_self = leaf.self_["pv"].merge_disjoint(back)
    if pv_self is None:
        raise SchedulerError("hide exit: returned heap overlaps private heap")
    self2 = leaf.self_.without(phi.labels).set("pv", Heap(pv_self))
    nxt = Leaf(leaf.tid, None, leaf.env, rest, self2, RUN, None, ("v", value))
    return Config(nxt, cfg.joint.without(phi.labels),
                  cfg.root_other.without(phi.labels), frame.outer,
                  cfg.next_loc, cfg.next_tid)


def _reduce(cfg: Config, leaf: Leaf, ctx: _Ctx) -> Config:
    node = leaf.node
    if isinstance(node, Ret):
        nxt = Leaf(leaf.tid, None, leaf.env, leaf.kont, leaf.self_,
                   RUN, None, ("v", node.fn(leaf.env)))
    elif isinstance(node, Seq):
        nxt = Leaf(leaf.tid, node.first, leaf.env,
                   leaf.kont + (SeqK(node.var, node.rest, leaf.env),), leaf.self_)
    elif isinstance(node, IfN):
        nxt = Leaf(leaf.tid, node.then if node.cond(leaf.env) else node.els,
                   leaf.env, leaf.kont, leaf.self_)
    elif isinstance(node, LoopN):
        nxt = Leaf(leaf.tid, node.body, leaf.env,
                   leaf.kont + (LoopK(node, leaf.env, ctx.loop_bound - 1),), leaf.self_)
    elif isinstance(node, InjectN):
        nxt = Leaf(leaf.tid, node.body, leaf.env,
                   leaf.kont + (InjectK(node.home),), leaf.self_)
    elif isinstance(node, SpecedN):
        caps = node.spec.capture(leaf_view(cfg, leaf), leaf.env)
        nxt = Leaf(leaf.tid, node.body, leaf.env,
                   leaf.kont + (SpecK(node.spec, caps),), leaf.self_)
    elif isinstance(node, ParN):
        return _fork(cfg, leaf, node, ctx)
    elif isinstance(node, HideN):
        return _hide_enter(cfg, leaf, node, ctx)
    else:
        raise SchedulerError(f"cannot reduce node {node!r}")
    return Config(replace_leaf(cfg.tree, leaf.tid, nxt), cfg.joint,
                  cfg.root_other, cfg.conc, cfg.next_loc, cfg.next_tid)


def _fork(cfg: Config, leaf: Leaf, node: ParN, ctx: _Ctx) -> Config:
    view = leaf_view(cfg, leaf)
    a, b = node.split(leaf.env, view)
    try:
        c1, c2 = subjective_split(view, a, b)
    except StateError as exc:
        raise SchedulerError(f"bad split directive: {exc}") from exc
    left = Leaf(leaf.tid, node.left, leaf.env, (), c1.self_)
    right = Leaf(cfg.next_tid, node.right, leaf.env, (), c2.self_)
    par = ParT(left, right, leaf.tid, leaf.env, leaf.kont)
    return Config(replace_leaf(cfg.tree, leaf.tid, par), cfg.joint,
                  cfg.root_other, cfg.conc, cfg.next_loc, cfg.next_tid + 1)


def _try_collapse(cfg: Config, ctx: _Ctx) -> Optional[Config]:
    def find(tree):
        if isinstance(tree, Leaf):
            return None
        if (isinstance(tree.left, Leaf) and tree.left.status == DONE
                and isinstance(tree.right, Leaf) and tree.right.status == DONE):
            return tree
        return find(tree.left) or find(tree.right)

    par = find(cfg.tree)
    if par is None:
        return None
    c1 = leaf_view(cfg, par.left)
    c2 = leaf_view(cfg, par.right)
    try:
        joined = subjective_join(c1, c2)
    except StateError as exc:
        ctx.report("join", "sibling views with a common environment part",
                   str(exc), par.tid)
        joined = SubjState(
            map_pointwise_join(c1.self_, c2.self_) or c1.self_, cfg.joint,
            cfg.root_other)
    if ctx.scenario.on_join is not None:
        for msg in ctx.scenario.on_join(c1, c2, joined):
            ctx.report("join:check", ctx.scenario.name, msg, par.tid)
    value = (par.left.result, par.right.result)
    merged = Leaf(par.tid, None, par.env, par.kont, joined.self_, RUN, None, ("v", value))

    def rebuild(tree):
        if tree is par:
            return merged
        if isinstance(tree, Leaf):
            return tree
        left = rebuild(tree.left)
        right = rebuild(tree.right)
        if left is tree.left and right is tree.right:
            return tree
        return ParT(left, right, tree.tid, tree.env, tree.kont)

    return Config(rebuild(cfg.tree), cfg.joint, cfg.root_other, cfg.conc,
                  cfg.next_loc, cfg.next_tid)


def normalize(cfg: Config, ctx: _Ctx) -> Config:
    """Drive every thread to an atomic action, completion, or a stuck state."""
    while True:
        progressed = False
        for leaf in leaves(cfg.tree):
            if leaf.status != RUN:
                continue
            if leaf.node is None:
                cfg = _deliver(cfg, leaf, ctx)
                progressed = True
                break
            if not isinstance(leaf.node, ActN):
                cfg = _reduce(cfg, leaf, ctx)
                progressed = True
                break
        if progressed:
            continue
        collapsed = _try_collapse(cfg, ctx)
        if collapsed is not None:
            cfg = collapsed
            continue
        return cfg


# ---------------------------------------------------------------------------
# Action stepping
# ---------------------------------------------------------------------------

def _active_homes(leaf: Leaf) -> Optional[frozenset]:
    homes = None
    for frame in leaf.kont:
        if isinstance(frame, InjectK):
            homes = frame.home if homes is None else (homes & frame.home)
    return homes


def _check_step(cfg: Config, leaf: Leaf, action: AtomicAction,
                w: SubjState, w2: SubjState, ctx: _Ctx) -> bool:
    ok = True
    if w2.other != w.other:
        ctx.report("guarantee", "environment component untouched",
                   f"{action.name} changed other", leaf.tid)
        ok = False
    if not validate(w2) or not cfg.conc.coherent(w2):
        ctx.report("coherence", f"post-state in {cfg.conc.name}",
                   f"{action.name} -> {w2.render()}", leaf.tid)
        ok = False
    msg = step_matches_claim(cfg.conc, action, w, w2)
    if msg is not None:
        ctx.report("transition", action.claimed, msg, leaf.tid)
        ok = False
    homes = _active_homes(leaf)
    if homes is not None:
        outside = set(w.labels()) - homes
        for lbl in outside:
            if w2.self_.get(lbl) != w.self_.get(lbl) or w2.joint.get(lbl) != w.joint.get(lbl):
                ctx.report("inject", f"labels {sorted(homes)} only",
                           f"{action.name} touched {lbl}", leaf.tid)
                ok = False
    for lbl in w.labels():
        old, new = w.self_[lbl], w2.self_[lbl]
        old_h = old.aux if isinstance(old, Triple) else old
        new_h = new.aux if isinstance(new, Triple) else new
        if isinstance(old_h, Hist) and isinstance(new_h, Hist):
            if not pcm_order(old_h, new_h):
                ctx.report("history-growth", f"{lbl} self history grows",
                           f"{action.name} shrank it", leaf.tid)
                ok = False
    for inv in ctx.scenario.step_invariants:
        msg = inv(w, w2)
        if msg is not None:
            ctx.report("invariant", ctx.scenario.name, msg, leaf.tid)
            ok = False
    return ok


def step_action(cfg: Config, leaf: Leaf, ctx: _Ctx):
    """Fire the leaf's pending action; returns (config, event) or None on
    a violating step."""
    action: AtomicAction = leaf.node.build(leaf.env)
    w = leaf_view(cfg, leaf)
    try:
        w2, res, sctx = run_atomic(action, w, StepCtx(cfg.next_loc))
    except ActionSafetyError as exc:
        ctx.report("safety", f"{action.name} precondition", str(exc), leaf.tid)
        return None
    if not _check_step(cfg, leaf, action, w, w2, ctx):
        return None
    delta = []
    for lbl in sorted(w.labels()):
        if w.self_[lbl] != w2.self_[lbl] or w.joint[lbl] != w2.joint[lbl]:
            delta.append(f"{lbl}: <{render(w2.self_[lbl])} | {render(w2.joint[lbl])}>")
    nxt = Leaf(leaf.tid, None, leaf.env, leaf.kont, w2.self_, RUN, None, ("v", res))
    cfg2 = Config(replace_leaf(cfg.tree, leaf.tid, nxt), w2.joint,
                  cfg.root_other, cfg.conc, sctx.next_loc, cfg.next_tid)
    event = Event(len(ctx.path), leaf.tid, action.name, action.claimed, res,
                  "; ".join(delta))
    return cfg2, event


def ready_leaves(cfg: Config) -> list[Leaf]:
    return sorted(
        (l for l in leaves(cfg.tree)
         if l.status == RUN and isinstance(l.node, ActN)),
        key=lambda l: l.tid,
    )


def initial_config(scenario: Scenario) -> Config:
    f = flatten(scenario.root)
    top = max((loc.n for loc in f.keys()), default=0)
    root = Leaf(0, scenario.program, EMPTY_MAP, (), scenario.root.self_)
    return Config(root, scenario.root.joint, scenario.root.other,
                  scenario.conc, top + 1, 1)


def _finish_path(cfg: Config, ctx: _Ctx, report: ExplorationReport) -> str:
    """Classify a frontier-less configuration; runs final oracles once per
    distinct final state (the verdict is cached and reused)."""
    if isinstance(cfg.tree, Leaf) and cfg.tree.status == DONE:
        msgs = ctx.checked_finals.get(cfg)
        if msgs is None:
            msgs = (
                list(ctx.scenario.final_oracle(cfg, cfg.tree.result))
                if ctx.scenario.final_oracle is not None
                else []
            )
            ctx.checked_finals[cfg] = msgs
            for msg in msgs:
                ctx.report("final", ctx.scenario.name, msg, 0)
        if msgs:
            return "violation"
        report.finals.add(cfg)
        return "complete"
    return "inconclusive"


# ---------------------------------------------------------------------------
# Exploration drivers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Summary:
    complete: int
    inconclusive: int
    violating: int


def explore(scenario: Scenario, step_bound: int, loop_bound: int,
            max_violations: int = 50) -> ExplorationReport:
    """Depth-first enumeration of every interleaving up to ``step_bound``
    action steps, ties broken by ascending thread id."""
    if step_bound < 1:
        raise ValueError("step bound must be >= 1")
    ctx = _Ctx(scenario, loop_bound, max_violations)
    report = ExplorationReport(scenario.name)
    cfg0 = normalize(initial_config(scenario), ctx)
    memo: dict = {}

    def go(cfg: Config, used: int) -> _Summary:
        key = (cfg, used)
        hit = memo.get(key)
        if hit is not None:
            return hit
        report.nodes += 1
        ready = ready_leaves(cfg)
        if not ready:
            kind = _finish_path(cfg, ctx, report)
            s = _Summary(
                1 if kind == "complete" else 0,
                1 if kind == "inconclusive" else 0,
                1 if kind == "violation" else 0,
            )
            memo[key] = s
            return s
        if used >= step_bound:
            s = _Summary(0, 1, 0)
            memo[key] = s
            return s
        complete = inconclusive = violating = 0
        for leaf in ready:
            before = len(ctx.violations)
            outcome = step_action(cfg, leaf, ctx)
            report.edges += 1
            if outcome is None:
                violating += 1
                continue
            cfg2, event = outcome
            ctx.path.append((leaf.tid, event.action, render(event.result)))
            cfg2 = normalize(cfg2, ctx)
            if len(ctx.violations) > before:
                violating += 1
                ctx.path.pop()
                continue
            sub = go(cfg2, used + 1)
            ctx.path.pop()
            complete += sub.complete
            inconclusive += sub.inconclusive
            violating += sub.violating
        s = _Summary(complete, inconclusive, violating)
        memo[key] = s
        return s

    total = go(cfg0, 0)
    report.complete = total.complete
    report.inconclusive = total.inconclusive
    report.violating = total.violating
    report.violations = ctx.violations
    return report


def _run_schedule(scenario: Scenario, pick, budget: int, loop_bound: int) -> Trace:
    ctx = _Ctx(scenario, loop_bound)
    report = ExplorationReport(scenario.name)
    cfg = normalize(initial_config(scenario), ctx)
    events: list[Event] = []
    used = 0
    while used < budget:
        ready = ready_leaves(cfg)
        if not ready:
            break
        leaf = pick(ready, cfg)
        if leaf is None:
            break
        outcome = step_action(cfg, leaf, ctx)
        if outcome is None:
            break
        cfg, event = outcome
        ctx.path.append((leaf.tid, event.action, render(event.result)))
        events.append(event)
        cfg = normalize(cfg, ctx)
        used += 1
    if ctx.violations:
        verdict = "violation"
    elif isinstance(cfg.tree, Leaf) and cfg.tree.status == DONE:
        if ctx.scenario.final_oracle is not None:
            for msg in ctx.scenario.final_oracle(cfg, cfg.tree.result):
                ctx.report("final", scenario.name, msg, 0)
        verdict = "violation" if ctx.violations else "pass"
    else:
        verdict = "inconclusive"
    results = cfg.tree.result if isinstance(cfg.tree, Leaf) else None
    return Trace(events, tuple(e.tid for e in events), cfg, verdict,
                 ctx.violations, results)


def run_random(scenario: Scenario, seed: int, budget: int, loop_bound: int) -> Trace:
    rng = random.Random(seed)

    def pick(ready, cfg):
        return rng.choice(ready)

    return _run_schedule(scenario, pick, budget, loop_bound)


def run_replay(scenario: Scenario, schedule, loop_bound: int) -> Trace:
    """Re-run a recorded schedule (list of thread ids) deterministically."""
    queue = list(schedule)

    def pick(ready, cfg):
        if not queue:
            return None
        tid = queue.pop(0)
        for leaf in ready:
            if leaf.tid == tid:
                return leaf
        raise SchedulerError(f"replay: thread {tid} not ready")

    return _run_schedule(scenario, pick, len(schedule), loop_bound)
