"""Native stress mode: OS threads, logging CAS, post-hoc validation."""

from histrio.native import NativeReport, NativeStack, log_as_history, stress, validate_log
from histrio.history import is_complete, is_continuous, is_stacklike
from histrio.specs import stack_accounting


def test_single_threaded_log_is_valid():
    s = NativeStack()
    s.push("a")
    s.push("b")
    assert s.pop() == "b"
    rep = NativeReport(1, 3)
    validate_log(s.log, s.contents(), rep)
    assert rep.verdict == "pass"
    assert rep.pushes == 2 and rep.pops == 1
    assert s.contents() == ("a",)


def test_streaming_checks_agree_with_the_history_predicates():
    rep = stress(threads=2, ops=40, seed=11)
    assert rep.verdict == "pass"
    # rebuild the log of a fresh small run and cross-validate
    s = NativeStack()
    import random

    rng = random.Random(3)
    for i in range(60):
        if rng.random() < 0.6:
            s.push(("t", i))
        else:
            s.pop()
    tau = log_as_history(s.log)
    assert is_complete(tau) and is_continuous(tau) and is_stacklike(tau)
    assert stack_accounting(tau, s.contents()) == []


def test_doctored_log_fails_validation():
    s = NativeStack()
    s.push("a")
    s.push("b")
    log = list(s.log)
    log.append((3, "pop", "a"))  # pops the non-head element
    rep = NativeReport(1, 3)
    validate_log(log, ("a",), rep)
    assert rep.verdict == "violation"

    gap = [(1, "push", "a"), (3, "push", "b")]
    rep2 = NativeReport(1, 2)
    validate_log(gap, ("b", "a"), rep2)
    assert rep2.verdict == "violation"
    assert any("incomplete" in v for v in rep2.violations)


def test_stress_smoke():
    rep = stress(threads=4, ops=120, seed=0)
    assert rep.verdict == "pass", rep.violations[:3]
    assert rep.committed > 0
