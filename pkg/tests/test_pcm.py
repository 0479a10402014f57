"""PCM algebra: join laws, element carriers, label maps."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from histrio.fmap import FrozenMap
from histrio.pcm import (
    HEAP_PCM,
    IDSET_PCM,
    MUTEX_PCM,
    NOT_OWN,
    OWN,
    SHIPPED_INSTANCES,
    SNAPSHOT,
    STACK,
    STACK_HIST_PCM,
    Heap,
    Hist,
    IdSet,
    Loc,
    PcmMismatchError,
    Triple,
    check_pcm_laws,
    join,
    map_disjoint_union,
    map_pointwise_join,
    pcm_order,
    subtract,
    unit_like,
)


def test_mutex_join_table():
    assert join(OWN, NOT_OWN) is OWN
    assert join(NOT_OWN, OWN) is OWN
    assert join(NOT_OWN, NOT_OWN) is NOT_OWN
    assert join(OWN, OWN) is None


def test_unit_laws_per_carrier():
    samples = [
        Heap({Loc(3): 7}),
        Hist.of(STACK, {1: ((), ("a",))}),
        IdSet.of(1, 4),
        OWN,
        Triple(IdSet.of(2), NOT_OWN, Hist(STACK)),
    ]
    for x in samples:
        assert join(x, unit_like(x)) == x
        assert join(unit_like(x), x) == x


def test_heap_join_requires_disjoint_locations():
    h1, h2 = Heap({Loc(1): 0}), Heap({Loc(1): 1})
    assert join(h1, h2) is None
    assert join(h1, Heap({Loc(2): 1})) == Heap({Loc(1): 0, Loc(2): 1})


def test_cross_instance_join_is_a_usage_error():
    with pytest.raises(PcmMismatchError):
        join(Heap(), Hist(STACK))
    with pytest.raises(PcmMismatchError):
        join(Hist(STACK), Hist(SNAPSHOT))  # scenario kinds never mix


def test_idset_join_requires_disjointness():
    assert join(IdSet.of(1), IdSet.of(1)) is None
    assert join(IdSet.of(1), IdSet.of(2)) == IdSet.of(1, 2)


def test_triple_join_is_componentwise():
    a = Triple(IdSet.of(0), NOT_OWN, Hist.of(STACK, {1: ((), ("a",))}))
    b = Triple(IdSet.of(1), OWN, Hist.of(STACK, {2: (("a",), ())}))
    got = join(a, b)
    assert got.ids == IdSet.of(0, 1)
    assert got.mx is OWN
    assert set(got.aux.stamps()) == {1, 2}
    assert join(a, Triple(IdSet.of(0), NOT_OWN, Hist(STACK))) is None


def test_map_disjoint_union():
    m1 = FrozenMap({"pv": Heap({Loc(1): 0})})
    m2 = FrozenMap({"tb": Hist(STACK)})
    assert map_disjoint_union(m1, m2) == FrozenMap(
        {"pv": Heap({Loc(1): 0}), "tb": Hist(STACK)}
    )
    assert map_disjoint_union(m1, FrozenMap({"pv": Heap()})) is None
    assert map_disjoint_union(m1, FrozenMap()) == m1


def test_map_pointwise_join():
    m1 = FrozenMap({"tb": Hist.of(STACK, {1: ((), ("a",))})})
    m2 = FrozenMap({"tb": Hist.of(STACK, {2: (("a",), ())})})
    got = map_pointwise_join(m1, m2)
    assert set(got["tb"].stamps()) == {1, 2}
    assert map_pointwise_join(
        FrozenMap({"lk": OWN}), FrozenMap({"lk": OWN})
    ) is None
    assert map_pointwise_join(FrozenMap(), FrozenMap()) == FrozenMap()
    assert map_pointwise_join(m1, FrozenMap()) is None  # label sets differ


def test_pcm_order_examples():
    t1 = Hist.of(STACK, {1: ((), ("a",))})
    t2 = Hist.of(STACK, {1: ((), ("a",)), 2: (("a",), ())})
    assert pcm_order(t1, t2)
    assert pcm_order(t1, t1)
    assert not pcm_order(t2, t1)
    assert not pcm_order(t1, Hist.of(STACK, {2: (("a",), ())}))
    assert pcm_order(NOT_OWN, OWN)
    assert pcm_order(NOT_OWN, NOT_OWN)
    assert not pcm_order(OWN, NOT_OWN)


def test_subtract_is_inverse_of_join():
    whole = Heap({Loc(1): 0, Loc(2): 5})
    part = Heap({Loc(2): 5})
    rest = subtract(whole, part)
    assert join(part, rest) == whole
    assert subtract(part, whole) is None
    assert subtract(OWN, OWN) is NOT_OWN


def test_all_shipped_instances_satisfy_the_laws():
    rng = random.Random(0)
    for inst in SHIPPED_INSTANCES:
        rep = check_pcm_laws(inst, 300, rng)
        assert rep.ok, (inst.name, rep.violations[:3])


def test_mutex_laws_checked_exhaustively():
    rep = check_pcm_laws(MUTEX_PCM, 1)
    assert rep.samples == 8  # 2 x 2 x 2 triples
    assert rep.ok


def test_broken_join_is_reported():
    def broken(a, b):
        if isinstance(a, IdSet) and isinstance(b, IdSet) and a.ids and b.ids:
            return a  # keeps the left operand: not commutative
        return join(a, b)

    rep = check_pcm_laws(IDSET_PCM, 100, random.Random(3), join_fn=broken)
    assert not rep.ok


@st.composite
def heaps(draw):
    cells = draw(st.dictionaries(st.integers(1, 8), st.integers(0, 3), max_size=4))
    return Heap({Loc(n): v for n, v in cells.items()})


@settings(max_examples=200, deadline=None)
@given(heaps(), heaps(), heaps())
def test_heap_join_commutative_associative(a, b, c):
    ab, ba = join(a, b), join(b, a)
    assert ab == ba

    def opt(x, y):
        return None if (x is None or y is None) else join(x, y)

    assert opt(ab, c) == opt(a, opt(b, c))


@settings(max_examples=200, deadline=None)
@given(heaps(), heaps())
def test_heap_subtract_roundtrip(a, b):
    ab = join(a, b)
    if ab is not None:
        assert subtract(ab, a) == b
        assert pcm_order(a, ab) and pcm_order(b, ab)


def test_pointwise_join_forms_a_pcm_over_fixed_labels():
    from histrio.pcm import unit_map_like

    rng = random.Random(12)
    for _ in range(100):
        m = FrozenMap({"tb": STACK_HIST_PCM.sample(rng), "pv": HEAP_PCM.sample(rng)})
        m2 = FrozenMap({"tb": STACK_HIST_PCM.sample(rng), "pv": HEAP_PCM.sample(rng)})
        assert map_pointwise_join(m, unit_map_like(m)) == m
        assert map_pointwise_join(m, m2) == map_pointwise_join(m2, m)
