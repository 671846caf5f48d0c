import itertools

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from artifact import graphs as G
from artifact.graphs import (ESSENTIAL, FOUR_COLOR, PLAIN, TWO_COLOR, EdgeColor, GraphError, KGraph,
                             SizingError, canonical_id, classify, enumerate_graphs, parse, serialize)

FIG1 = "n=3;m=2;e=1>2,1>G2,2>G1,2>3,3>G1,3>G2"  # [[X,[X,Y]],Y]
FIG2 = "n=5;m=2;e=1>G1,1>2,2>5,2>3,3>G2,3>4,4>G2,4>1,5>G1,5>G2"  # tr(ad X ad[X,Y] ad Y ad Y)


def brute_force(n, m, essential):
    """Labeled admissible graphs straight from the three rules."""
    pool = [t for t in range(-m, n + 1) if t != 0]
    out = []
    for t in itertools.product(pool, repeat=2 * n):
        ok = True
        for v in range(1, n + 1):
            a, b = t[2 * v - 2], t[2 * v - 1]
            if v in (a, b) or a == b:
                ok = False
        if ok and essential:
            ok = all(t.count(v) <= 1 for v in range(1, n + 1))
        if ok:
            out.append(KGraph(n, m, t))
    return out


def test_enumerate_small_examples():
    assert [serialize(g) for g in enumerate_graphs(0, 2)] == ["n=0;m=2;e="]
    ids = [g.id for g in enumerate_graphs(1, 2)]
    assert ids == sorted(["n=1;m=2;e=1>G1,1>G2", "n=1;m=2;e=1>G2,1>G1"])


@pytest.mark.parametrize("n,m", [(1, 2), (2, 2), (3, 2), (2, 1), (2, 3)])
@pytest.mark.parametrize("essential", [False, True])
def test_enumeration_matches_brute_force(n, m, essential):
    labeled = brute_force(n, m, essential)
    classes = enumerate_graphs(n, m, ESSENTIAL if essential else PLAIN)
    assert {canonical_id(g) for g in labeled} == {g.id for g in classes}
    # multiplicities recover the labeled count
    assert sum(G.labeled_multiplicity(g) for g in classes) == len(labeled)


def test_essential_is_smaller_subset():
    # with two aerial vertices no vertex can be hit twice, so the first strict drop is at n=3
    assert {g.id for g in enumerate_graphs(2, 2, ESSENTIAL)} == {g.id for g in enumerate_graphs(2, 2, PLAIN)}
    assert len(enumerate_graphs(3, 2, ESSENTIAL)) < len(enumerate_graphs(3, 2, PLAIN))
    for n in (1, 2, 3):
        assert {g.id for g in enumerate_graphs(n, 2, ESSENTIAL)} <= {g.id for g in enumerate_graphs(n, 2, PLAIN)}


def test_enumeration_is_deterministic():
    a = [g.id for g in enumerate_graphs(3, 2, ESSENTIAL)]
    b = [g.id for g in enumerate_graphs(3, 2, ESSENTIAL)]
    assert a == b == sorted(a)


def test_colored_enumeration():
    two = enumerate_graphs(1, 2, TWO_COLOR)
    assert len(two) == 2 * 4
    assert all(all(not c.four for c in g.colors) for g in two)
    four = enumerate_graphs(1, 1, FOUR_COLOR, n_infinity=1)
    assert all(all(c.four for c in g.colors) for g in four)
    assert all(g.n_infinity == 1 for g in four)


def test_enumeration_cap_and_preconditions():
    with pytest.raises(SizingError):
        enumerate_graphs(5, 2, PLAIN)
    with pytest.raises(ValueError):
        enumerate_graphs(1, 0)
    with pytest.raises(ValueError):
        enumerate_graphs(0, 1)


def test_classify_examples():
    assert classify(parse(FIG1)).kind == G.LIE
    assert G.root(parse(FIG1)) == 1
    assert classify(parse(FIG2)).kind == G.WHEEL
    assert sorted(G.wheel_cycle(parse(FIG2))) == [1, 2, 3, 4]
    # vertex 2 hit by 1 and 3
    assert classify(parse("n=3;m=2;e=1>2,1>G1,2>G1,2>G2,3>2,3>G2")).kind == G.NON_ESSENTIAL
    sup = classify(parse("n=2;m=2;e=1>G1,1>G2,2>G1,2>G2"))
    assert sup.kind == G.SUPERPOSITION
    assert [k for k, _ in sup.components] == [G.LIE, G.LIE]


def test_canonical_id_examples():
    g = parse(FIG1)
    for perm in itertools.permutations([1, 2, 3]):
        assert G.relabel(g, perm).id == g.id
    a, b = enumerate_graphs(1, 2)
    assert a.id != b.id
    assert parse(g.id).id == g.id


def test_parse_examples_and_errors():
    g = parse("n=1;m=2;e=1>G1,1>G2")
    assert g.targets == (-1, -2)
    assert serialize(g) == "n=1;m=2;e=1>G1,1>G2"
    with pytest.raises(GraphError, match=r"loop forbidden \(rule ii\)"):
        parse("e=1>1")
    with pytest.raises(GraphError, match="rule iii"):
        parse("n=1;m=2;e=1>G1,1>G1")
    with pytest.raises(GraphError, match="rule i"):
        parse("n=1;m=2;e=1>G3,1>G1")
    with pytest.raises(GraphError, match="column"):
        parse("n=1;m=2;e=1>X1,1>G1")
    with pytest.raises(GraphError, match="line 2"):
        G.parse_many("n=1;m=2;e=1>G1,1>G2\nn=1;m=2;e=1>Q")
    colored = parse("n=1;m=2;e=1>G1:+-,1>G2:--")
    assert colored.colors == (EdgeColor(1, -1), EdgeColor(-1, -1))
    with pytest.raises(GraphError):
        parse("n=1;m=2;e=1>G1:+,1>G2:+-")  # mixed tag widths


def test_parse_many_skips_comments():
    gs = G.parse_many("# header\nn=1;m=2;e=1>G1,1>G2  # first\n\nn=1;m=2;e=1>G2,1>G1\n")
    assert len(gs) == 2


# property tests

@st.composite
def graphs(draw, colors=False):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(2 if n == 1 else 1, 3))
    pool = [t for t in range(-m, n + 1) if t != 0]
    targets = []
    for v in range(1, n + 1):
        choices = [t for t in pool if t != v]
        a = draw(st.sampled_from(choices))
        b = draw(st.sampled_from([t for t in choices if t != a]))
        targets += [a, b]
    cols = None
    if colors:
        width = draw(st.sampled_from([1, 2]))
        signs = st.sampled_from([1, -1])
        cols = tuple(EdgeColor(draw(signs), draw(signs) if width == 2 else None) for _ in targets)
    return KGraph(n, m, tuple(targets), cols)


@settings(max_examples=150, deadline=None)
@given(graphs(colors=True), st.data())
def test_canonical_id_relabel_invariance(g, data):
    perm = data.draw(st.permutations(range(1, g.n_aerial + 1)))
    h = G.relabel(g, perm)
    assert h.id == g.id
    assert classify(h).kind == classify(g).kind


@settings(max_examples=150, deadline=None)
@given(graphs(colors=True))
def test_serialize_parse_round_trip(g):
    assert parse(serialize(g)) == g
    assert serialize(parse(g.id)) == g.id


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_classification_invariants(g):
    cls = classify(g)
    essential = all(g.in_degree(v) <= 1 for v in range(1, g.n_aerial + 1))
    assert (cls.kind == G.NON_ESSENTIAL) == (not essential)
    if cls.kind == G.LIE:
        r = G.root(g)
        assert all(g.in_degree(v) == 1 for v in range(1, g.n_aerial + 1) if v != r)
    if cls.kind == G.WHEEL:
        cyc = G.wheel_cycle(g)
        assert len(cyc) >= 2
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            assert b in g.out(a)


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_edge_swap_changes_id_but_not_class(g):
    assume(g.n_aerial <= 3)
    h = G.swap_edges(g, 1)
    assert classify(h).kind == classify(g).kind
    assert G.edge_sorted(h)[0] == G.edge_sorted(g)[0]
    assert G.edge_sorted(h)[1] == -G.edge_sorted(g)[1]
