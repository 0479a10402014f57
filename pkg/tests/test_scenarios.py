"""End-to-end scenario explorations at reduced scale, plus sabotage checks."""

import random

from histrio.erasure import compare_erased
from histrio.scheduler import check_phi, explore, run_random
from histrio.scenarios import (
    flat_combiner_scenario,
    make_treiber_phi,
    pair_snapshot_scenario,
    producer_consumer_scenario,
    seq_recovery_scenario,
    treiber_scenario,
)
from histrio.structures import treiber as tb


def test_pair_snapshot_single_writer():
    rep = explore(pair_snapshot_scenario(writers=1), step_bound=40, loop_bound=3)
    assert rep.verdict == "pass"
    assert rep.inconclusive == 0
    assert rep.complete > 0


def test_treiber_one_pusher_one_popper():
    rep = explore(treiber_scenario(pushers=1, elems=("a",)), step_bound=40,
                  loop_bound=3)
    assert rep.verdict == "pass"
    assert rep.inconclusive == 0


def test_producer_consumer_n2():
    rep = explore(producer_consumer_scenario(2), step_bound=50, loop_bound=3)
    assert rep.verdict == "pass"
    assert rep.complete > 0


def test_flat_combiner_two_threads():
    rep = explore(flat_combiner_scenario(2), step_bound=80, loop_bound=3)
    assert rep.verdict == "pass"
    assert rep.complete > 0


def test_seq_recovery_exact_shapes():
    sc = seq_recovery_scenario(("b", "c"), "a")
    rep = explore(sc, step_bound=20, loop_bound=3)
    assert rep.verdict == "pass" and rep.complete == 1
    [final] = list(rep.finals)
    parsed = tb.parse_stack(final.tree.self_["pv"])
    _, contents, _, grb = parsed
    assert contents == ("a", "b", "c")
    assert not grb  # a lone push leaks nothing


def test_seq_recovery_detects_a_wrong_expectation():
    sc = seq_recovery_scenario(("b",), "a")
    # sabotage: demand a different recovered history
    orig = sc.on_hide_exit

    def wrong(phi, g2, hidden):
        msgs = orig(phi, g2, hidden)
        return msgs or ["forced"] if g2.entries else msgs

    sc.on_hide_exit = wrong
    rep = explore(sc, step_bound=20, loop_bound=3)
    assert rep.verdict == "violation"


def test_random_runs_agree_with_the_oracles():
    for seed in range(20):
        t = run_random(treiber_scenario(), seed, 120, 3)
        assert t.verdict in ("pass", "inconclusive")
        assert not t.violations


def test_phi_properties_by_sampling():
    phi = make_treiber_phi(())
    rep = check_phi(phi, 120, random.Random(0))
    assert rep.ok, rep.violations[:3]


def test_erasure_commutation_smoke():
    builders = [
        lambda: pair_snapshot_scenario(2),
        treiber_scenario,
        lambda: producer_consumer_scenario(2),
        lambda: flat_combiner_scenario(2),
        seq_recovery_scenario,
    ]
    for b in builders:
        for seed in (0, 1, 2):
            assert compare_erased(b, seed, 150, 3) is None


def test_erasure_mismatch_is_detected():
    """Sabotaged primitive: the erased run diverges and the check says so."""

    def broken():
        sc = treiber_scenario()
        from histrio.actions import Skip
        from histrio.program import ActN

        def patch(node):
            if isinstance(node, ActN) and node.label == "alloc":
                orig = node.build

                def build(env):
                    a = orig(env)
                    a.primitive = Skip()  # erasure no longer matches
                    return a

                node.build = build

        _walk_nodes(sc.program, patch)
        return sc

    msgs = [compare_erased(broken, seed, 120, 3) for seed in range(3)]
    assert any(m is not None for m in msgs)


def _walk_nodes(node, fn, seen=None):
    seen = seen if seen is not None else set()
    if id(node) in seen:
        return
    seen.add(id(node))
    fn(node)
    for attr in ("first", "rest", "then", "els", "body", "left", "right"):
        child = getattr(node, attr, None)
        if child is not None and hasattr(child, "nid"):
            _walk_nodes(child, fn, seen)


def test_reader_only_snapshot_returns_the_initial_pair():
    rep = explore(pair_snapshot_scenario(writers=0), step_bound=10, loop_bound=3)
    assert rep.verdict == "pass" and rep.complete == 1
    [final] = list(rep.finals)
    assert final.tree.result == ("A", "C")


def test_single_thread_flat_combine_serializes_itself():
    from histrio.pcm import Hist, STACK
    from histrio.structures import flatcombiner as fc

    rep = explore(flat_combiner_scenario(1), step_bound=40, loop_bound=3)
    assert rep.verdict == "pass" and rep.complete >= 1
    from histrio.scheduler import leaf_view

    shape = fc.stack_shape(1)
    for final in rep.finals:
        view = leaf_view(final, final.tree).restrict(fc.HOME)
        total = fc.total_aux(shape, view)
        assert total == Hist.of(STACK, {0: ((), ()), 1: ((), ("e0",))})


def test_naive_read_pair_is_caught_by_the_spec():
    """Dropping the version re-check admits pairs that never coexisted;
    some interleaving with two writers must expose it."""
    from histrio.program import ActN, Ret, do
    from histrio.scenarios import par_chain, split_take
    from histrio.scheduler import Scenario, explore
    from histrio.specs import read_pair_spec
    from histrio.program import SpecedN
    from histrio.structures import snapshot as sp
    from histrio.pcm import Hist

    naive_body = do(
        ("cx", ActN(lambda env: sp.read_x(), "readX")),
        ("cy", ActN(lambda env: sp.read_y(), "readY")),
        ret=Ret(lambda env: (env["cx"][0], env["cy"][0])),
    )
    reader = SpecedN(read_pair_spec(), naive_body)
    root = sp.initial_state("A", "C")
    program = par_chain(
        [reader, sp.writer_program("B", "D"), sp.writer_program("E", "G")],
        [split_take({sp.LB: Hist(sp.SNAPSHOT)}),
         split_take({sp.LB: root.self_[sp.LB]})],
    )
    sc = Scenario("naive-reader", sp.concurroid(), root, program)
    rep = explore(sc, step_bound=40, loop_bound=3)
    assert rep.verdict == "violation"
    assert any(v.check == "spec:readPair" for v in rep.violations)
    # the counterexample is replayable and small
    v = next(v for v in rep.violations if v.check == "spec:readPair")
    assert len(v.schedule) <= 10
