import pytest
from hypothesis import given, settings

from fsmnet.packet import FlowSpec, MissingLocation, Packet, matches, rewrite
from fsmnet.policy import (Drop, Dynamic, Fwd, Identity, IfThenElse, Match, Modify,
                           MissingPortContext, Named, Parallel, Sequential, drop, evaluate,
                           flood, identity, is_filter, match, modify, par, render, seq)

from conftest import packets, policies
from oracles import PORTS

P1 = Packet(switch=1, inport=1, srcip="10.0.0.1", dstip="10.0.0.2",
            srcmac="00:00:00:00:00:01", dstmac="00:00:00:00:00:02")


def ev(pol, p):
    return evaluate(pol, p, PORTS)


def flat_map(stages, p):
    """Brute-force sequential evaluation, one stage at a time."""
    current = {p}
    for stage in stages:
        nxt = set()
        for q in current:
            nxt |= set(ev(stage, q))
        current = nxt
    return frozenset(current)


def test_drop_annihilates():
    assert ev(Drop(), P1) == frozenset()
    assert ev(drop, P1) == frozenset()


def test_identity_passes():
    assert ev(identity, P1) == {P1}


def test_infected_guard_drops_h1():
    pol = IfThenElse(FlowSpec(srcip="10.0.0.1"), drop, identity)
    assert ev(pol, P1) == frozenset()
    other = P1.replace(srcip="10.0.0.2")
    assert ev(pol, other) == {other}


def test_modify_then_match_keeps_rewritten_packet():
    pol = Sequential((Modify(FlowSpec(dstip="10.0.0.3")), Match(FlowSpec(dstip="10.0.0.3"))))
    want = rewrite(P1, FlowSpec(dstip="10.0.0.3"))
    assert ev(pol, P1) == {want}
    assert ev(pol, P1) == flat_map(pol.policies, P1)


def test_fwd_sets_outport_only():
    (q,) = ev(Fwd(2), P1)
    assert q.outport == 2
    assert q.headers == P1.headers


def test_flood_skips_inport():
    outs = ev(flood, P1)
    assert sorted(q.outport for q in outs) == [2, 3]


@pytest.mark.parametrize("pol", [Fwd(1), flood])
def test_location_required(pol):
    with pytest.raises(MissingLocation):
        evaluate(pol, Packet(srcip="10.0.0.1"), PORTS)


def test_flood_needs_ports():
    with pytest.raises(MissingPortContext):
        evaluate(flood, P1)


def test_modify_requires_assignments():
    with pytest.raises(ValueError):
        Modify(FlowSpec())


def test_constructors_flatten():
    a, b, c = match(srcip="10.0.0.1"), modify(dstport=80), Fwd(1)
    assert seq(seq(a, b), c) == Sequential((a, b, c))
    assert (a >> b) >> c == a >> (b >> c)
    assert par(a, par(b, c)) == Parallel((a, b, c))
    assert a + b + c == Parallel((a, b, c))


def test_named_equality_is_by_name():
    assert Named("drop", Identity()) == drop
    assert Named("x", Drop()) != Named("y", Drop())
    assert len({drop, Named("drop", Drop()), identity}) == 2


# -- rendering ---------------------------------------------------------------

def test_render_infected_branch():
    text = render(IfThenElse(FlowSpec(srcip="10.0.0.1"), drop, identity))
    assert text.split("\n") == [
        "if",
        "    match: ('srcip', 10.0.0.1)",
        "then",
        "    drop",
        "else",
        "    identity",
    ]


def test_render_redirect_modify():
    m = Modify(FlowSpec([("dstip", "10.0.0.3"), ("dstmac", "00:00:00:00:00:03")]))
    assert render(m) == "modify: ('dstip', 10.0.0.3) ('dstmac', 00:00:00:00:00:03)"


def test_render_nested_and_dynamic():
    inner = IfThenElse(FlowSpec(srcip="10.0.0.1"), Dynamic(drop), identity)
    lines = render(inner).split("\n")
    assert lines[3:5] == ["    [DynamicPolicy]", "    drop"]
    assert render(Fwd(3)) == "fwd 3"


def test_render_flood_content():
    text = render(flood, ports=[1, 2, 3])
    assert "flood on:" in text
    for port in (1, 2, 3):
        assert f"1[{port}]" in text


def test_is_filter():
    assert is_filter(match(srcip="10.0.0.1") >> identity)
    assert not is_filter(match(srcip="10.0.0.1") >> Fwd(1))
    assert not is_filter(IfThenElse(FlowSpec(), modify(dstport=80), drop))


# -- algebraic laws (hypothesis) ---------------------------------------------

def same(a, b, p):
    return ev(a, p) == ev(b, p)


@settings(max_examples=200)
@given(policies(), packets())
def test_drop_is_zero_for_seq(x, p):
    assert ev(Sequential((Drop(), x)), p) == frozenset()
    assert ev(Sequential((x, Drop())), p) == frozenset()


@settings(max_examples=200)
@given(policies(), packets())
def test_drop_is_unit_for_par(x, p):
    assert same(Parallel((x, Drop())), x, p)


@settings(max_examples=200)
@given(policies(), packets())
def test_identity_is_unit_for_seq(x, p):
    assert same(Sequential((Identity(), x)), x, p)
    assert same(Sequential((x, Identity())), x, p)


@settings(max_examples=200)
@given(policies(), policies(), policies(), packets())
def test_seq_associative(a, b, c, p):
    assert same(Sequential((Sequential((a, b)), c)), Sequential((a, Sequential((b, c)))), p)


@settings(max_examples=200)
@given(policies(), policies(), packets())
def test_par_commutative_idempotent(a, b, p):
    assert same(Parallel((a, b)), Parallel((b, a)), p)
    assert same(Parallel((a, a)), a, p)


@settings(max_examples=200)
@given(policies(), policies(), packets())
def test_seq_is_flat_map(a, b, p):
    assert ev(Sequential((a, b)), p) == flat_map((a, b), p)


@given(policies(filters_only=True), packets())
def test_filters_never_change_packets(x, p):
    assert ev(x, p) <= {p}


@given(policies(), packets())
def test_eval_is_pure(x, p):
    assert ev(x, p) == ev(x, p)


@given(policies(), packets())
def test_ite_matches_guard(x, p):
    g = FlowSpec(srcip="10.0.0.1")
    pol = IfThenElse(g, x, Drop())
    assert ev(pol, p) == (ev(x, p) if matches(p, g) else frozenset())
